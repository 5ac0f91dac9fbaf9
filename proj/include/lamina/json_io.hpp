#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamina/error.hpp"
#include "lamina/field.hpp"
#include "lamina/laminate.hpp"
#include "lamina/matrix.hpp"

namespace lamina {

using nlohmann::json;

inline json to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    fail(ErrorCode::ConfigInvalid, "matrix JSON must be an array of rows");
  int d = int(j.size());
  if (d < 2 || d > kMaxDim)
    fail(ErrorCode::ConfigInvalid, "matrix dimension must be 2..4");
  Mat m(d);
  for (int i = 0; i < d; ++i) {
    if (!j[i].is_array() || int(j[i].size()) != d)
      fail(ErrorCode::ConfigInvalid, "matrix JSON rows must have length d");
    for (int k = 0; k < d; ++k) {
      if (!j[i][k].is_number())
        fail(ErrorCode::ConfigInvalid, "matrix entries must be numbers");
      m(i, k) = j[i][k].get<double>();
    }
  }
  if (!m.all_finite()) fail(ErrorCode::ConfigInvalid, "matrix entries must be finite");
  return m;
}

namespace detail {

inline json laminate_node_to_json(const Laminate& lam, int id) {
  const LamNode& n = lam.node(id);
  if (n.is_leaf()) return json{{"atom", to_json(n.matrix)}};
  json j;
  j["t"] = n.t;
  j["matrix"] = to_json(n.matrix);
  j["left"] = laminate_node_to_json(lam, n.left);
  j["right"] = laminate_node_to_json(lam, n.right);
  return j;
}

inline int laminate_node_from_json(const json& j, int d,
                                   std::vector<LamNode>& nodes) {
  int id = int(nodes.size());
  nodes.emplace_back();
  if (j.contains("atom")) {
    nodes[id].matrix = mat_from_json(j.at("atom"));
    if (nodes[id].matrix.dim() != d)
      fail(ErrorCode::ConfigInvalid, "laminate atom dimension mismatch");
    return id;
  }
  if (!j.contains("t") || !j.contains("matrix") || !j.contains("left") ||
      !j.contains("right"))
    fail(ErrorCode::ConfigInvalid, "laminate node needs t, matrix, left, right");
  Mat m = mat_from_json(j.at("matrix"));
  if (m.dim() != d) fail(ErrorCode::ConfigInvalid, "laminate node dimension mismatch");
  double t = j.at("t").get<double>();
  nodes[id].matrix = m;
  nodes[id].t = t;
  int left = laminate_node_from_json(j.at("left"), d, nodes);
  int right = laminate_node_from_json(j.at("right"), d, nodes);
  nodes[id].left = left;
  nodes[id].right = right;
  return id;
}

}  // namespace detail

inline json to_json(const Laminate& lam) {
  json j;
  j["d"] = lam.dim();
  j["root"] = to_json(lam.root_matrix());
  j["tree"] = detail::laminate_node_to_json(lam, lam.root());
  return j;
}

// Structural load; split witnesses are not part of the schema and are
// recovered from the child difference where needed. Run validate_hm on the
// result before trusting it.
inline Laminate laminate_from_json(const json& j) {
  if (!j.contains("d") || !j.contains("tree"))
    fail(ErrorCode::ConfigInvalid, "laminate JSON needs d and tree");
  int d = j.at("d").get<int>();
  std::vector<LamNode> nodes;
  detail::laminate_node_from_json(j.at("tree"), d, nodes);
  Laminate lam = Laminate::from_nodes(d, std::move(nodes));
  if (j.contains("root")) {
    Mat root = mat_from_json(j.at("root"));
    if (frobenius_norm(root - lam.root_matrix()) >
        1e-9 * (1.0 + frobenius_norm(root)))
      fail(ErrorCode::ConfigInvalid, "laminate root does not match tree root");
  }
  return lam;
}

inline json to_json(const GradientField& f) {
  json j;
  j["d"] = f.dim();
  j["n"] = f.grid_n();
  json cells = json::array();
  for (int c = 0; c < f.cell_count(); ++c) {
    const Cell& cell = f.cell(c);
    if (cell.slabs.size() == 1 && cell.slabs[0].w == 1.0) {
      cells.push_back(to_json(cell.slabs[0].m));
    } else {
      json slabs = json::array();
      for (const Slab& s : cell.slabs)
        slabs.push_back(json{{"w", s.w}, {"matrix", to_json(s.m)}});
      cells.push_back(json{{"slabs", std::move(slabs)}});
    }
  }
  j["cells"] = std::move(cells);
  return j;
}

inline GradientField field_from_json(const json& j) {
  if (!j.contains("d") || !j.contains("n") || !j.contains("cells"))
    fail(ErrorCode::ConfigInvalid, "field JSON needs d, n, cells");
  int d = j.at("d").get<int>();
  int n = j.at("n").get<int>();
  const json& cells = j.at("cells");
  GradientField f = GradientField::constant(Mat::zero(d), n);
  if (int(cells.size()) != f.cell_count())
    fail(ErrorCode::ConfigInvalid, "field JSON has wrong cell count");
  for (int c = 0; c < f.cell_count(); ++c) {
    const json& jc = cells[c];
    Cell cell;
    if (jc.is_array()) {
      cell.slabs.push_back({1.0, mat_from_json(jc)});
    } else if (jc.contains("slabs")) {
      for (const json& js : jc.at("slabs"))
        cell.slabs.push_back({js.at("w").get<double>(), mat_from_json(js.at("matrix"))});
    } else {
      fail(ErrorCode::ConfigInvalid, "field cell must be a matrix or a slab list");
    }
    if (cell.slabs.empty()) fail(ErrorCode::ConfigInvalid, "field cell has no slabs");
    for (const Slab& s : cell.slabs)
      if (s.m.dim() != d) fail(ErrorCode::ConfigInvalid, "field cell dimension mismatch");
    f.cell(c) = std::move(cell);
  }
  return f;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::ConfigInvalid, "cannot open for writing: " + path);
  out << text;
  if (!out) fail(ErrorCode::ConfigInvalid, "write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ConfigInvalid, "cannot open: " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace lamina
