#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>

#include "fockwit/fock.hpp"

namespace fockwit {

// Shared matrix schema used by every file interface in the project:
//   { "rows": r, "cols": c, "data": [[re, im], ...] }
// with "data" holding r*c entries in row-major order.

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      data.push_back({m(i, j).real(), m(i, j).imag()});
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw std::invalid_argument("matrix_from_json: expected {rows, cols, data}");
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols))
    throw std::invalid_argument("matrix_from_json: data length does not match shape");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2, ++k) {
      const auto& e = data[k];
      if (!e.is_array() || e.size() != 2)
        throw std::invalid_argument("matrix_from_json: entries must be [re, im] pairs");
      m(i, j2) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  return m;
}

}  // namespace fockwit
