#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "reifsplit/linalg.hpp"
#include "reifsplit/point_sample.hpp"

namespace reifsplit {

using Json = nlohmann::ordered_json;

Json to_json(const Vector& v);
Json to_json(const Matrix& m);  // list of rows
Vector vector_from_json(const Json& j);
Matrix matrix_from_json(const Json& j);

Json to_json(const Ball& b);
Ball ball_from_json(const Json& j);

// CSV with header x0..x{n-1}, one point per row. The resolution is not part of
// the CSV format and has to be supplied on read.
void write_sample_csv(const PointSample& s, const std::string& path);
PointSample read_sample_csv(const std::string& path, double resolution);

// {n, h, points: [[...], ...]}
Json sample_to_json(const PointSample& s);
PointSample sample_from_json(const Json& j);

void write_json_file(const Json& j, const std::string& path);
Json read_json_file(const std::string& path);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace reifsplit
