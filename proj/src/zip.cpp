#include "modelraider/zip.hpp"

#include <zlib.h>

#include <limits>
#include <set>

namespace modelraider {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kVersion = 20;
constexpr std::uint16_t kDosTime = 0;      // 00:00:00
constexpr std::uint16_t kDosDate = 0x0021; // 1980-01-01
constexpr std::uint16_t kUtf8Flag = 1u << 11;

std::uint32_t crc_of(ByteView data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = static_cast<uInt>(
        std::min<std::size_t>(data.size() - off, std::numeric_limits<uInt>::max()));
    crc = crc32(crc, data.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

struct CentralRecord {
  std::string path;
  std::uint16_t method = 0;
  std::uint32_t crc = 0;
  std::uint32_t compressed = 0;
  std::uint32_t size = 0;
  std::uint32_t local_offset = 0;
};

std::vector<CentralRecord> read_central(ByteView archive) {
  if (archive.size() < 22)
    throw ZipError("archive too short for an end-of-central-directory record");
  // The end record sits within the last 22 + 65535 bytes (comment).
  const std::size_t lowest = archive.size() > 22 + 0xFFFF ? archive.size() - 22 - 0xFFFF : 0;
  std::size_t end_at = std::string::npos;
  for (std::size_t p = archive.size() - 22 + 1; p-- > lowest;) {
    ByteReader r(archive, p);
    if (r.u32() == kEndSig) {
      end_at = p;
      break;
    }
  }
  if (end_at == std::string::npos)
    throw ZipError("end-of-central-directory record not found");

  try {
    ByteReader end(archive, end_at + 4);
    const std::uint16_t disk = end.u16();
    const std::uint16_t cd_disk = end.u16();
    end.u16(); // entries on this disk
    const std::uint16_t total = end.u16();
    const std::uint32_t cd_size = end.u32();
    const std::uint32_t cd_offset = end.u32();
    if (disk != 0 || cd_disk != 0)
      throw ZipError("multi-disk archives are not supported");
    if (static_cast<std::uint64_t>(cd_offset) + cd_size > end_at)
      throw ZipError("central directory overlaps its end record");

    std::vector<CentralRecord> out;
    ByteReader r(archive, cd_offset);
    for (int i = 0; i < total; ++i) {
      if (r.u32() != kCentralSig)
        throw ZipError("bad central directory signature at entry " + std::to_string(i));
      CentralRecord c;
      r.u16(); // version made by
      r.u16(); // version needed
      const std::uint16_t flags = r.u16();
      c.method = r.u16();
      r.u16();
      r.u16();
      c.crc = r.u32();
      c.compressed = r.u32();
      c.size = r.u32();
      const std::uint16_t name_len = r.u16();
      const std::uint16_t extra_len = r.u16();
      const std::uint16_t comment_len = r.u16();
      r.u16(); // disk start
      r.u16(); // internal attrs
      r.u32(); // external attrs
      c.local_offset = r.u32();
      c.path = to_string(r.raw(name_len));
      r.raw(extra_len);
      r.raw(comment_len);
      if (flags & 1u)
        throw ZipError("encrypted entry: " + c.path);
      if (c.compressed == 0xFFFFFFFFu || c.size == 0xFFFFFFFFu || c.local_offset == 0xFFFFFFFFu)
        throw ZipError("zip64 entries are not supported: " + c.path);
      out.push_back(std::move(c));
    }
    return out;
  } catch (const ShortRead &s) {
    throw ZipError("central directory truncated at offset " + std::to_string(s.offset));
  }
}

Bytes inflate_raw(ByteView in, std::size_t expected) {
  Bytes out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK)
    throw ZipError("inflateInit failed");
  zs.next_in = const_cast<Bytef *>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected)
    throw ZipError("corrupt deflate stream");
  return out;
}

} // namespace

Bytes write_zip(const std::vector<ZipEntry> &entries) {
  std::set<std::string> seen;
  ByteWriter w;
  ByteWriter central;
  for (const auto &e : entries) {
    if (!seen.insert(e.path).second)
      throw ZipError("duplicate entry: " + e.path);
    if (e.data.size() >= 0xFFFFFFFFu || e.path.size() > 0xFFFF)
      throw ZipError("entry too large for a non-zip64 archive: " + e.path);
    const std::uint32_t crc = crc_of(e.data);
    const auto size = static_cast<std::uint32_t>(e.data.size());
    const auto offset = static_cast<std::uint32_t>(w.size());

    w.u32(kLocalSig);
    w.u16(kVersion);
    w.u16(kUtf8Flag);
    w.u16(0); // stored
    w.u16(kDosTime);
    w.u16(kDosDate);
    w.u32(crc);
    w.u32(size);
    w.u32(size);
    w.u16(static_cast<std::uint16_t>(e.path.size()));
    w.u16(0);
    w.raw(e.path);
    w.raw(e.data);

    central.u32(kCentralSig);
    central.u16(kVersion);
    central.u16(kVersion);
    central.u16(kUtf8Flag);
    central.u16(0);
    central.u16(kDosTime);
    central.u16(kDosDate);
    central.u32(crc);
    central.u32(size);
    central.u32(size);
    central.u16(static_cast<std::uint16_t>(e.path.size()));
    central.u16(0);
    central.u16(0);
    central.u16(0);
    central.u16(0);
    central.u32(0);
    central.u32(offset);
    central.raw(e.path);
  }
  if (entries.size() > 0xFFFF)
    throw ZipError("too many entries");
  const auto cd_offset = static_cast<std::uint32_t>(w.size());
  const auto cd_size = static_cast<std::uint32_t>(central.size());
  w.raw(central.bytes());
  w.u32(kEndSig);
  w.u16(0);
  w.u16(0);
  w.u16(static_cast<std::uint16_t>(entries.size()));
  w.u16(static_cast<std::uint16_t>(entries.size()));
  w.u32(cd_size);
  w.u32(cd_offset);
  w.u16(0);
  return std::move(w).take();
}

std::vector<ZipEntryInfo> list_zip(ByteView archive) {
  std::vector<ZipEntryInfo> out;
  for (const auto &c : read_central(archive))
    out.push_back({c.path, c.size});
  return out;
}

std::vector<ZipEntry> read_zip(ByteView archive) {
  std::vector<ZipEntry> out;
  for (const auto &c : read_central(archive)) {
    try {
      ByteReader r(archive, c.local_offset);
      if (r.u32() != kLocalSig)
        throw ZipError("bad local header signature for " + c.path);
      r.raw(22);
      const std::uint16_t name_len = r.u16();
      const std::uint16_t extra_len = r.u16();
      r.raw(name_len);
      r.raw(extra_len);
      const ByteView stored = r.raw(c.compressed);
      Bytes data;
      if (c.method == 0) {
        if (c.compressed != c.size)
          throw ZipError("stored entry size mismatch: " + c.path);
        data.assign(stored.begin(), stored.end());
      } else if (c.method == 8) {
        data = inflate_raw(stored, c.size);
      } else {
        throw ZipError("unsupported compression method " + std::to_string(c.method) + " for " +
                       c.path);
      }
      if (crc_of(data) != c.crc)
        throw ZipError("CRC mismatch for " + c.path);
      out.push_back({c.path, std::move(data)});
    } catch (const ShortRead &s) {
      throw ZipError("entry " + c.path + " truncated at offset " + std::to_string(s.offset));
    }
  }
  return out;
}

} // namespace modelraider
