#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "s2s/data.hpp"

namespace s2s {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double to_double(const std::string& s, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(line) + ": not a number '" + s + "'");
  }
}

}  // namespace

Dataset read_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const auto header = split(line);
  int nx = 0, ny = 0;
  for (const auto& h : header) {
    const bool is_x = h.size() > 1 && h[0] == 'x';
    const bool is_y = h.size() > 1 && h[0] == 'y';
    const std::string idx = h.substr(1);
    const int expected = is_x ? nx : ny;
    if ((!is_x && !is_y) || idx != std::to_string(expected)) {
      throw IoError(path + ": header must be x0..x{n-1},y0..y{m-1}, got '" + h + "'");
    }
    if (is_x && ny > 0) throw IoError(path + ": x columns must precede y columns");
    (is_x ? nx : ny) += 1;
  }
  if (nx == 0 || ny == 0) throw IoError(path + ": need at least one x and one y column");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != nx + ny) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(nx + ny) + " columns");
    }
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(to_double(c, path, lineno));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IoError(path + ": no samples");
  Dataset d;
  d.kind = "csv";
  d.x.resize(static_cast<Eigen::Index>(rows.size()), nx);
  d.y.resize(static_cast<Eigen::Index>(rows.size()), ny);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (int c = 0; c < nx; ++c) d.x(k, c) = rows[k][c];
    for (int c = 0; c < ny; ++c) d.y(k, c) = rows[k][nx + c];
  }
  return d;
}

void write_csv_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (int c = 0; c < data.input_dim(); ++c) out << (c ? "," : "") << "x" << c;
  for (int c = 0; c < data.output_dim(); ++c) out << ",y" << c;
  out << "\n" << std::setprecision(17);
  for (int r = 0; r < data.size(); ++r) {
    for (int c = 0; c < data.input_dim(); ++c) out << (c ? "," : "") << data.x(r, c);
    for (int c = 0; c < data.output_dim(); ++c) out << "," << data.y(r, c);
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

Mat read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const auto shape = split(line);
  if (shape.size() != 2) throw IoError(path + ": first line must be 'rows,cols'");
  const int rows = static_cast<int>(to_double(shape[0], path, 1));
  const int cols = static_cast<int>(to_double(shape[1], path, 1));
  if (rows < 0 || cols < 0) throw IoError(path + ": negative shape");
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw IoError(path + ": missing row " + std::to_string(r));
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != cols) {
      throw IoError(path + ":" + std::to_string(r + 2) + ": expected " +
                    std::to_string(cols) + " values");
    }
    for (int c = 0; c < cols; ++c) m(r, c) = to_double(cells[c], path, r + 2);
  }
  return m;
}

void write_matrix_csv(const Mat& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << m.rows() << "," << m.cols() << "\n" << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace s2s
