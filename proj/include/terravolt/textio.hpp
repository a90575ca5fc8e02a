#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace terravolt {

// Parse/format helpers shared by the text file formats (DEM, dataset,
// weights, plans, config). All numeric output goes through format_double so
// that save/load round trips reproduce doubles bit-exactly.

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 17 significant digits: enough to reproduce any double bit-exactly on load.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline double parse_double(const std::string& tok, int line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw parse_error("line " + std::to_string(line_no) +
                      ": expected a number, got '" + tok + "'");
  }
}

inline long parse_long(const std::string& tok, int line_no) {
  try {
    std::size_t pos = 0;
    long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw parse_error("line " + std::to_string(line_no) +
                      ": expected an integer, got '" + tok + "'");
  }
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw parse_error("cannot open '" + path + "' for reading");
  return f;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  return f;
}

}  // namespace terravolt
