// Copyright 2026 The prefopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON checkpoint format for MlpModel:
//   {"layer_dims": [...],
//    "activations": {"hidden": "tanh", "output": "bounded_tanh",
//                    "output_offset": [...], "output_scale": [...]},
//    "weights": [ [[row], [row], ...] per layer ],
//    "biases":  [ [...] per layer ]}
// Doubles are written in shortest round-trip form, so save/load is exact.

#include <string>
#include <vector>

#include "prefopt/io.hpp"
#include "prefopt/nn/mlp.hpp"

namespace prefopt::nn {

inline Json VectorToJson(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline Eigen::VectorXd VectorFromJson(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Json MatrixToJson(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd MatrixFromJson(const Json& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) {
      throw DimensionError("checkpoint", "ragged weight matrix");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), j) = rows[i][j].get<double>();
    }
  }
  return m;
}

inline Json ToJson(const MlpModel& m) {
  Json j;
  j["layer_dims"] = m.layer_dims;
  Json act = {{"hidden", ActivationName(m.hidden_activation)},
              {"output", ActivationName(m.output_activation)}};
  if (m.output_activation == Activation::kBoundedTanh) {
    act["output_offset"] = VectorToJson(m.output_offset);
    act["output_scale"] = VectorToJson(m.output_scale);
  }
  j["activations"] = std::move(act);
  j["weights"] = Json::array();
  j["biases"] = Json::array();
  for (int l = 0; l < m.num_layers(); ++l) {
    j["weights"].push_back(MatrixToJson(m.weights[l]));
    j["biases"].push_back(VectorToJson(m.biases[l]));
  }
  return j;
}

inline MlpModel MlpFromJson(const Json& j) {
  try {
    MlpModel m;
    m.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    const Json& act = j.at("activations");
    m.hidden_activation = ParseActivation(act.at("hidden").get<std::string>());
    m.output_activation = ParseActivation(act.at("output").get<std::string>());
    if (m.output_activation == Activation::kBoundedTanh) {
      m.output_offset = VectorFromJson(act.at("output_offset"));
      m.output_scale = VectorFromJson(act.at("output_scale"));
    }
    const Json& w = j.at("weights");
    const Json& b = j.at("biases");
    if (w.size() + 1 != m.layer_dims.size() || b.size() != w.size()) {
      throw DimensionError("checkpoint", "layer count mismatch");
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
      m.weights.push_back(MatrixFromJson(w[l], m.layer_dims[l]));
      m.biases.push_back(VectorFromJson(b[l]));
    }
    m.Validate();
    return m;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed model checkpoint: ") + e.what());
  }
}

}  // namespace prefopt::nn
