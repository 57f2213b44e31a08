#pragma once

#include "bcidal/pipeline.hpp"

#include <filesystem>
#include <string>

namespace bcidal {

inline constexpr int kModelFormatVersion = 1;

/// Canonical JSON text of a trained model (method tag, preprocessing, parameters).
std::string serialize_model(const TrainedModel& model);

/// Inverse of serialize_model. Throws ConfigError for an unknown method tag or
/// format version, DataError for any other schema violation.
TrainedModel parse_model(const std::string& text);

void emit_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace bcidal
