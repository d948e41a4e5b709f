#ifndef MODELRAIDER_IO_HPP
#define MODELRAIDER_IO_HPP

#include "modelraider/attack.hpp"
#include "modelraider/bytes.hpp"
#include "modelraider/extractor.hpp"
#include "modelraider/fingerprint.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace modelraider {

using Json = nlohmann::ordered_json;

Bytes read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, ByteView data);
std::string read_text(const std::filesystem::path &path);
void write_text(const std::filesystem::path &path, std::string_view text);

// Fingerprint schema: {model_id, layers:[{id, shape, dtype}], param_digests:[hex]}.
// Shapes carry the leading batch dimension.
Json fingerprint_to_json(const FingerprintRecord &record);
FingerprintRecord fingerprint_from_json(const nlohmann::json &j);

Json to_json(const ScanReport &report);
Json to_json(const TransferReport &report);
Json to_json(const ErrorMatrix &errors);
/// Adversarial images are not serialised; outcomes and counts are.
Json to_json(const AttackRun &run);

} // namespace modelraider

#endif // MODELRAIDER_IO_HPP
