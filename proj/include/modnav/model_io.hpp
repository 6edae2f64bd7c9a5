// JSON persistence for trained element models. Save -> load -> save is
// byte-identical; the Gram factorization is rebuilt on load.
#pragma once

#include "modnav/gp.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace modnav::io {

nlohmann::json shape_to_json(const geom::Shape& shape);
geom::Shape shape_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const gp::ElementModel& model);
gp::ElementModel model_from_json(const nlohmann::json& j);

// Atomic: writes to a temp file in the same directory, then renames.
void save_model(const std::filesystem::path& path, const gp::ElementModel& model);
gp::ElementModel load_model(const std::filesystem::path& path);

// Shared atomic text write used for every artifact the toolkit emits.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace modnav::io
