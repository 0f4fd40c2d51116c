#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "rlstm/lstm.hpp"

namespace rlstm {

// Model file layout:
//   {"x_max": number,
//    "layers": [{"W_f": [[...]], ..., "U_f": [[...]], ..., "b_f": [...], ...}],
//    "U_y": [[...]], "b_y": [...]}
// Matrices are row-major nested arrays. Shapes are validated strictly and
// unknown keys are rejected.
LstmParams model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const LstmParams& params);

LstmParams load_model(const std::string& path);
void save_model(const std::string& path, const LstmParams& params);

// Writes content to a temporary file in the target directory, then renames.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace rlstm
