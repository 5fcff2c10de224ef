#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mpt/features.hpp"
#include "mpt/measurement.hpp"
#include "mpt/spectral.hpp"

// Text formats. Every parse failure throws Error(kInvalidInput) with a
// message naming the offending field, line or column.
namespace mpt::io {

// 17 significant digits in scientific notation; parses back bit-identically.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& what);

std::string read_file(const std::filesystem::path& path);
// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Model JSON:
//   {"label": str, "alpha_m": num, "sigma_star_S_per_m": num, "mu_r": num,
//    "n0_m3": [c11, c22, c33, c12, c13, c23],
//    "modes": [{"lambda": num, "weights": [6 coefficients]}],
//    "omega_limit_rad_per_s": num (optional)}
struct ModelFile {
  ModalModel model;
  std::optional<double> omega_limit;
};
ModelFile parse_model(const std::string& json_text);
std::string format_model(const ModalModel& model, std::optional<double> omega_limit = {});

// Layout JSON:
//   {"object_position_m": [x, y, z],
//    "exciters": [{"h0_A_per_m": [3]}],
//    "receivers": [{"center_m": [3], "normal": [3], "radius_m": num,
//                   "quadrature_order": int}]}
// radius_m and quadrature_order are optional.
CoilLayout parse_layout(const std::string& json_text);

// Signature CSV: "# key=value" metadata lines (alpha_m, sigma_star_S_per_m,
// mu_r, label, optional omega_limit_rad_per_s), then the header
// omega_rad_per_s,Rt_c11,...,Rt_c23,I_c11,...,I_c23 and one row per sample.
std::string format_signature(const MptSignature& sig);
MptSignature parse_signature(const std::string& csv_text);

// Dataset CSV: one column per feature (named by feature_name) then one
// t_<class> column per class. The JSON sidecar holds the layout, the class
// names and any extra provenance passed in `extra_json`.
std::string format_dataset(const LabeledDataset& data);
std::string format_dataset_sidecar(const LabeledDataset& data, const std::string& extra_json = "{}");
LabeledDataset parse_dataset(const std::string& csv_text, const std::string& sidecar_json);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace mpt::io
