#ifndef MODELRAIDER_ZIP_HPP
#define MODELRAIDER_ZIP_HPP

// Minimal ZIP archive support: enough to assemble and take apart app
// packages. Writing always uses the stored method with a fixed timestamp so
// archives are byte-reproducible. Reading accepts stored and deflate entries.

#include "modelraider/bytes.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace modelraider {

class ZipError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ZipEntry {
  std::string path;
  Bytes data;
};

struct ZipEntryInfo {
  std::string path;
  std::uint64_t size = 0; // uncompressed
};

Bytes write_zip(const std::vector<ZipEntry> &entries);

/// Entries in central-directory (archive) order, metadata only.
std::vector<ZipEntryInfo> list_zip(ByteView archive);

/// Every entry with its data, CRC-checked.
std::vector<ZipEntry> read_zip(ByteView archive);

} // namespace modelraider

#endif // MODELRAIDER_ZIP_HPP
