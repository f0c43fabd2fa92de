#include <franson/tagfile.hpp>

#include <array>
#include <cstring>
#include <istream>
#include <ostream>

namespace franson {

namespace {

template <typename T>
void put_le(char* dst, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    dst[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFU);
}

template <typename T>
T get_le(const char* src) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(src[i])) << (8 * i);
  return static_cast<T>(v);
}

} // namespace

void write_header(std::ostream& out, const TagFileHeader& header) {
  std::array<char, f3tt::kHeaderBytes> buf{};
  std::memcpy(buf.data(), f3tt::kMagic, 4);
  put_le<std::uint16_t>(buf.data() + 4, header.version);
  put_le<std::uint32_t>(buf.data() + 6, header.resolution_ps);
  put_le<std::uint8_t>(buf.data() + 10, header.channel_count);
  out.write(buf.data(), buf.size());
}

TagFileHeader read_header(std::istream& in) {
  std::array<char, f3tt::kHeaderBytes> buf{};
  in.read(buf.data(), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw FormatError("corrupt header: file shorter than the 11-byte F3TT header");
  if (std::memcmp(buf.data(), f3tt::kMagic, 4) != 0)
    throw FormatError("corrupt header: bad magic (expected \"F3TT\")");
  TagFileHeader h;
  h.version = get_le<std::uint16_t>(buf.data() + 4);
  h.resolution_ps = get_le<std::uint32_t>(buf.data() + 6);
  h.channel_count = get_le<std::uint8_t>(buf.data() + 10);
  if (h.version != f3tt::kVersion)
    throw FormatError("unsupported F3TT version " + std::to_string(h.version));
  if (h.resolution_ps == 0) throw FormatError("corrupt header: zero tagger resolution");
  if (h.channel_count == 0) throw FormatError("corrupt header: zero channel count");
  return h;
}

TagFileWriter::TagFileWriter(const std::filesystem::path& path, TagFileHeader header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  write_header(out_, header);
}

void TagFileWriter::write(std::span<const TimeTag> tags) {
  constexpr std::size_t kBatch = 4096;
  std::array<char, kBatch * f3tt::kRecordBytes> buf{};
  std::size_t pos = 0;
  while (pos < tags.size()) {
    const std::size_t n = std::min(kBatch, tags.size() - pos);
    for (std::size_t i = 0; i < n; ++i) {
      char* rec = buf.data() + i * f3tt::kRecordBytes;
      rec[0] = static_cast<char>(tags[pos + i].channel);
      put_le<std::uint64_t>(rec + 1, tags[pos + i].timestamp);
    }
    out_.write(buf.data(), static_cast<std::streamsize>(n * f3tt::kRecordBytes));
    pos += n;
  }
  if (!out_) throw IoError("write failed on " + path_.string());
  count_ += tags.size();
}

void TagFileWriter::close() {
  out_.flush();
  if (!out_) throw IoError("write failed on " + path_.string());
  out_.close();
}

TagFileReader::TagFileReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open " + path.string());
  header_ = read_header(in_);
}

std::size_t TagFileReader::read(TagStream& out, std::size_t max_records) {
  constexpr std::size_t kBatch = 4096;
  std::array<char, kBatch * f3tt::kRecordBytes> buf{};
  std::size_t total = 0;
  while (total < max_records) {
    const std::size_t want = std::min(kBatch, max_records - total);
    in_.read(buf.data(), static_cast<std::streamsize>(want * f3tt::kRecordBytes));
    const auto got = static_cast<std::size_t>(in_.gcount());
    const std::size_t whole = got / f3tt::kRecordBytes;
    for (std::size_t i = 0; i < whole; ++i) {
      const char* rec = buf.data() + i * f3tt::kRecordBytes;
      TimeTag t{static_cast<std::uint8_t>(rec[0]), get_le<std::uint64_t>(rec + 1)};
      if (t.channel >= header_.channel_count)
        throw FormatError("record " + std::to_string(record_index_ + i) + ": channel " +
                          std::to_string(t.channel) + " exceeds channel count");
      out.push_back(t);
    }
    record_index_ += whole;
    total += whole;
    if (got % f3tt::kRecordBytes != 0)
      throw FormatError("truncated record at index " + std::to_string(record_index_) + " in " +
                        path_.string());
    if (got < want * f3tt::kRecordBytes) break;
  }
  return total;
}

void write_tag_file(const std::filesystem::path& path, std::span<const TimeTag> tags,
                    TagFileHeader header) {
  TagFileWriter w(path, header);
  w.write(tags);
  w.close();
}

TagStream read_tag_file(const std::filesystem::path& path, TagFileHeader* header) {
  TagFileReader r(path);
  TagStream tags;
  while (r.read(tags, 1 << 16) > 0) {
  }
  if (header) *header = r.header();
  return tags;
}

} // namespace franson
