#pragma once

#include <franson/timetag.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace franson {

/// F3TT container:
///   "F3TT" | version u16 | resolution_ps u32 | channel_count u8      (11 bytes, little-endian)
///   then records of 9 bytes: channel u8 | timestamp u64 (ticks, little-endian)
namespace f3tt {
inline constexpr char kMagic[4] = {'F', '3', 'T', 'T'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 11;
inline constexpr std::size_t kRecordBytes = 9;
} // namespace f3tt

struct TagFileHeader {
  std::uint16_t version = f3tt::kVersion;
  std::uint32_t resolution_ps = kTaggerResolutionPs;
  std::uint8_t channel_count = kChannelCount;
};

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Streaming writer; records are appended in the order given.
class TagFileWriter {
public:
  explicit TagFileWriter(const std::filesystem::path& path, TagFileHeader header = {});
  void write(std::span<const TimeTag> tags);
  void close();
  std::uint64_t records_written() const { return count_; }

private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::uint64_t count_ = 0;
};

/// Streaming reader; validates the header on open.
class TagFileReader {
public:
  explicit TagFileReader(const std::filesystem::path& path);
  const TagFileHeader& header() const { return header_; }
  /// Appends up to `max_records` tags to `out`; returns the number read (0 at end of file).
  /// Throws FormatError on a truncated trailing record or a channel beyond channel_count.
  std::size_t read(TagStream& out, std::size_t max_records);

private:
  std::ifstream in_;
  std::filesystem::path path_;
  TagFileHeader header_;
  std::uint64_t record_index_ = 0;
};

void write_header(std::ostream& out, const TagFileHeader& header);
TagFileHeader read_header(std::istream& in);

void write_tag_file(const std::filesystem::path& path, std::span<const TimeTag> tags,
                    TagFileHeader header = {});
TagStream read_tag_file(const std::filesystem::path& path, TagFileHeader* header = nullptr);

} // namespace franson
