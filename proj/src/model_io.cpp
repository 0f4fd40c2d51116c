#include "rlstm/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rlstm {

namespace {

using nlohmann::json;

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw std::invalid_argument(name + ": expected a non-empty nested array");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw std::invalid_argument(name + ": ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw std::invalid_argument(name + ": non-numeric entry");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) {
    throw std::invalid_argument(name + ": expected a non-empty array");
  }
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw std::invalid_argument(name + ": non-numeric entry");
    v(i) = j[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw std::invalid_argument(where + ": unknown key \"" + key + "\"");
    }
  }
}

}  // namespace

LstmParams model_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("model: expected a JSON object");
  reject_unknown_keys(j, {"x_max", "layers", "U_y", "b_y"}, "model");
  for (const char* key : {"x_max", "layers", "U_y", "b_y"}) {
    if (!j.contains(key)) {
      throw std::invalid_argument(std::string("model: missing key \"") + key + "\"");
    }
  }

  LstmParams params;
  params.x_max = j.at("x_max").get<double>();
  const json& layers = j.at("layers");
  if (!layers.is_array() || layers.empty()) {
    throw std::invalid_argument("model: \"layers\" must be a non-empty array");
  }
  static const std::set<std::string> layer_keys = {"W_f", "W_i", "W_c", "W_o",
                                                   "U_f", "U_i", "U_c", "U_o",
                                                   "b_f", "b_i", "b_c", "b_o"};
  int index = 1;
  for (const json& jl : layers) {
    const std::string where = "layer " + std::to_string(index);
    reject_unknown_keys(jl, layer_keys, where);
    for (const auto& key : layer_keys) {
      if (!jl.contains(key)) {
        throw std::invalid_argument(where + ": missing key \"" + key + "\"");
      }
    }
    LstmLayerParams layer;
    layer.W_f = matrix_from_json(jl.at("W_f"), where + ".W_f");
    layer.W_i = matrix_from_json(jl.at("W_i"), where + ".W_i");
    layer.W_c = matrix_from_json(jl.at("W_c"), where + ".W_c");
    layer.W_o = matrix_from_json(jl.at("W_o"), where + ".W_o");
    layer.U_f = matrix_from_json(jl.at("U_f"), where + ".U_f");
    layer.U_i = matrix_from_json(jl.at("U_i"), where + ".U_i");
    layer.U_c = matrix_from_json(jl.at("U_c"), where + ".U_c");
    layer.U_o = matrix_from_json(jl.at("U_o"), where + ".U_o");
    layer.b_f = vector_from_json(jl.at("b_f"), where + ".b_f");
    layer.b_i = vector_from_json(jl.at("b_i"), where + ".b_i");
    layer.b_c = vector_from_json(jl.at("b_c"), where + ".b_c");
    layer.b_o = vector_from_json(jl.at("b_o"), where + ".b_o");
    params.layers.push_back(std::move(layer));
    ++index;
  }
  params.U_y = matrix_from_json(j.at("U_y"), "U_y");
  params.b_y = vector_from_json(j.at("b_y"), "b_y");
  params.validate();
  return params;
}

json model_to_json(const LstmParams& params) {
  json j;
  j["x_max"] = params.x_max;
  j["layers"] = json::array();
  for (const auto& layer : params.layers) {
    json jl;
    jl["W_f"] = matrix_to_json(layer.W_f);
    jl["W_i"] = matrix_to_json(layer.W_i);
    jl["W_c"] = matrix_to_json(layer.W_c);
    jl["W_o"] = matrix_to_json(layer.W_o);
    jl["U_f"] = matrix_to_json(layer.U_f);
    jl["U_i"] = matrix_to_json(layer.U_i);
    jl["U_c"] = matrix_to_json(layer.U_c);
    jl["U_o"] = matrix_to_json(layer.U_o);
    jl["b_f"] = vector_to_json(layer.b_f);
    jl["b_i"] = vector_to_json(layer.b_i);
    jl["b_c"] = vector_to_json(layer.b_c);
    jl["b_o"] = vector_to_json(layer.b_o);
    j["layers"].push_back(std::move(jl));
  }
  j["U_y"] = matrix_to_json(params.U_y);
  j["b_y"] = vector_to_json(params.b_y);
  return j;
}

LstmParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& err) {
    throw std::invalid_argument("malformed JSON in " + path + ": " + err.what());
  }
  try {
    return model_from_json(j);
  } catch (const std::invalid_argument& err) {
    throw std::invalid_argument(path + ": " + err.what());
  }
}

void save_model(const std::string& path, const LstmParams& params) {
  atomic_write(path, model_to_json(params).dump(2) + "\n");
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("rename failed: " + tmp + " -> " + path);
  }
}

}  // namespace rlstm
