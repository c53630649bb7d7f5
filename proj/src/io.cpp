#include "reifsplit/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "reifsplit/error.hpp"

namespace reifsplit {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw InvalidArgumentError("expected a JSON array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw InvalidArgumentError("expected a nonempty JSON array of rows");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != cols) throw InvalidArgumentError("ragged matrix rows");
    m.row(static_cast<Eigen::Index>(i)) = vector_from_json(j[i]).transpose();
  }
  return m;
}

Json to_json(const Ball& b) { return Json{{"center", to_json(b.center)}, {"radius", b.radius}}; }

Ball ball_from_json(const Json& j) {
  return Ball(vector_from_json(j.at("center")), j.at("radius").get<double>());
}

void write_sample_csv(const PointSample& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgumentError("cannot open " + path + " for writing");
  for (int c = 0; c < s.dim(); ++c) out << (c ? "," : "") << 'x' << c;
  out << '\n';
  const Matrix& p = s.points();
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    for (Eigen::Index c = 0; c < p.rows(); ++c) out << (c ? "," : "") << format_double(p(c, i));
    out << '\n';
  }
}

PointSample read_sample_csv(const std::string& path, double resolution) {
  std::ifstream in(path);
  if (!in) throw InvalidArgumentError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgumentError(path + ": empty file");
  int n = 0;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
      if (cell != "x" + std::to_string(n)) throw InvalidArgumentError(path + ": bad header cell '" + cell + "'");
      ++n;
    }
  }
  if (n == 0) throw InvalidArgumentError(path + ": header has no columns");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    int count = 0;
    while (std::getline(row, cell, ',')) {
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw InvalidArgumentError(path + ": unparsable number '" + cell + "'");
      }
      values.push_back(v);
      ++count;
    }
    if (count != n) throw InvalidArgumentError(path + ": row " + std::to_string(rows + 1) + " has wrong arity");
    ++rows;
  }
  Matrix m = Eigen::Map<Matrix>(values.data(), n, static_cast<Eigen::Index>(rows));
  return PointSample(std::move(m), resolution);
}

Json sample_to_json(const PointSample& s) {
  Json pts = Json::array();
  for (std::size_t i = 0; i < s.size(); ++i) pts.push_back(to_json(s.point(i)));
  return Json{{"n", s.dim()}, {"h", s.resolution()}, {"points", std::move(pts)}};
}

PointSample sample_from_json(const Json& j) {
  const int n = j.at("n").get<int>();
  const auto& pts = j.at("points");
  Matrix m(n, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (static_cast<int>(pts[i].size()) != n) throw DimensionMismatchError("sample JSON: point arity != n");
    m.col(static_cast<Eigen::Index>(i)) = vector_from_json(pts[i]);
  }
  return PointSample(std::move(m), j.at("h").get<double>());
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgumentError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgumentError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgumentError(path + ": " + e.what());
  }
}

}  // namespace reifsplit
