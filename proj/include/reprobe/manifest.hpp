#pragma once

#include <string>

#include "reprobe/layers.hpp"

namespace reprobe {

// Line-oriented model description (structure + init seed). Loading a
// manifest rebuilds the model with Kaiming-uniform weights drawn from a
// fresh stream at the recorded seed, so an experiment described by a
// manifest is exactly re-creatable. Trained weights travel separately as a
// flat little-endian float64 blob in parameter traversal order.
std::string model_to_manifest(const Model& model);
void save_model_manifest(const Model& model, const std::string& path);

Model model_from_manifest_text(const std::string& text);
Model load_model_manifest(const std::string& path);

void save_model_params(const Model& model, const std::string& path);
Model load_model(const std::string& manifest_path, const std::string& params_path = "");

std::size_t model_param_count(const Model& model);

}  // namespace reprobe
