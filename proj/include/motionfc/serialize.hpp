#pragma once

#include <string>

#include <json.hpp>

#include "motionfc/gcnet.hpp"

namespace motionfc {

nlohmann::json config_to_json(const GcnConfig& config);
/// Strict: unknown or missing keys are errors.
GcnConfig config_from_json(const nlohmann::json& j);
/// Empty when equal, otherwise "field: expected X, found Y; ...".
std::string describe_config_difference(const GcnConfig& expected, const GcnConfig& found);

/// Checkpoint document: format tag, version, config, seed, and every
/// parameter and buffer as {name, shape [rows, cols], row-major values}.
nlohmann::json model_to_json(const GcnModel& model);
GcnModel model_from_json(const nlohmann::json& doc);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace motionfc
