#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "slidepp/error.hpp"
#include "slidepp/raster.hpp"

namespace slidepp {
namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> parse_double(std::string_view tok) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

RasterGrid read_ascii_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file " + path.string());

  std::map<std::string, double> header;
  std::map<std::string, std::size_t> header_line;
  std::string line;
  std::size_t line_no = 0;
  static const std::array<std::string_view, 8> kKeys = {
      "NCOLS", "NROWS", "XLLCORNER", "YLLCORNER", "XLLCENTER", "YLLCENTER", "CELLSIZE", "NODATA_VALUE"};

  // Header: key/value lines until the first line starting with a number.
  std::streampos data_start = in.tellg();
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) {
      data_start = in.tellg();
      continue;
    }
    if (parse_double(toks[0]) || toks[0].front() == '-') break;
    if (toks.size() != 2) fail(path, line_no, "malformed header line '" + line + "'");
    const std::string key = upper(toks[0]);
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      fail(path, line_no, "unknown header key '" + std::string(toks[0]) + "'");
    }
    auto v = parse_double(toks[1]);
    if (!v) fail(path, line_no, "non-numeric header value '" + std::string(toks[1]) + "'");
    if (header.count(key)) fail(path, line_no, "duplicate header key '" + key + "'");
    header[key] = *v;
    header_line[key] = line_no;
    data_start = in.tellg();
  }
  const std::size_t header_lines = line_no - (in ? 1 : 0);

  auto require = [&](const char* key) {
    auto it = header.find(key);
    if (it == header.end()) fail(path, header_lines, std::string("missing header key ") + key);
    return it->second;
  };
  auto as_count = [&](const char* key) {
    double v = require(key);
    if (v < 1 || v != std::floor(v)) fail(path, header_line[key], std::string(key) + " must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  const std::size_t ncols = as_count("NCOLS");
  const std::size_t nrows = as_count("NROWS");
  const double cell = require("CELLSIZE");
  if (!(cell > 0.0)) fail(path, header_line["CELLSIZE"], "CELLSIZE must be positive");
  double xll = 0.0, yll = 0.0;
  if (header.count("XLLCORNER")) {
    xll = header["XLLCORNER"];
  } else if (header.count("XLLCENTER")) {
    xll = header["XLLCENTER"] - 0.5 * cell;
  } else {
    fail(path, header_lines, "missing header key XLLCORNER");
  }
  if (header.count("YLLCORNER")) {
    yll = header["YLLCORNER"];
  } else if (header.count("YLLCENTER")) {
    yll = header["YLLCENTER"] - 0.5 * cell;
  } else {
    fail(path, header_lines, "missing header key YLLCORNER");
  }
  const double nodata = require("NODATA_VALUE");

  GridGeometry geometry(xll, yll, nrows, ncols, cell);
  std::vector<double> values;
  values.reserve(nrows * ncols);

  in.clear();
  in.seekg(data_start);
  line_no = header_lines;
  std::size_t rows_read = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (rows_read == nrows) fail(path, line_no, "more than NROWS=" + std::to_string(nrows) + " data rows");
    if (toks.size() != ncols) {
      fail(path, line_no, "row has " + std::to_string(toks.size()) + " values, expected " + std::to_string(ncols));
    }
    for (auto tok : toks) {
      auto v = parse_double(tok);
      if (!v) fail(path, line_no, "non-numeric value '" + std::string(tok) + "'");
      values.push_back(*v == nodata ? kNoData : *v);
    }
    ++rows_read;
  }
  if (rows_read != nrows) {
    fail(path, line_no, "expected " + std::to_string(nrows) + " data rows, found " + std::to_string(rows_read));
  }
  return RasterGrid(geometry, std::move(values), nodata);
}

void write_ascii_grid(const RasterGrid& grid, const std::filesystem::path& path) {
  const auto& g = grid.geometry();
  const double nodata = grid.nodata_value();
  for (double v : grid.values()) {
    if (!is_nodata(v) && v == nodata) {
      throw DataError("grid contains a valid value equal to NODATA_VALUE " + format_double(nodata));
    }
    if (!is_nodata(v) && !std::isfinite(v)) throw DataError("grid contains a non-finite value");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write grid file " + path.string());
  out << "NCOLS " << g.n_cols() << '\n'
      << "NROWS " << g.n_rows() << '\n'
      << "XLLCORNER " << format_double(g.origin_x()) << '\n'
      << "YLLCORNER " << format_double(g.origin_y()) << '\n'
      << "CELLSIZE " << format_double(g.cell_size()) << '\n'
      << "NODATA_VALUE " << format_double(nodata) << '\n';
  const std::string nodata_token = format_double(nodata);
  std::string row;
  for (std::size_t r = 0; r < g.n_rows(); ++r) {
    row.clear();
    for (std::size_t c = 0; c < g.n_cols(); ++c) {
      if (c) row.push_back(' ');
      const double v = grid.at(r, c);
      row += is_nodata(v) ? nodata_token : format_double(v);
    }
    row.push_back('\n');
    out << row;
  }
  if (!out) throw DataError("failed writing grid file " + path.string());
}

std::vector<Point> read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open point file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<Point> points;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      std::string h;
      for (char c : t) {
        if (!std::isspace(static_cast<unsigned char>(c))) h.push_back(static_cast<char>(std::tolower(c)));
      }
      if (h != "x,y") fail(path, line_no, "expected header 'x,y'");
      header_seen = true;
      continue;
    }
    auto comma = t.find(',');
    if (comma == std::string_view::npos || t.find(',', comma + 1) != std::string_view::npos) {
      fail(path, line_no, "expected two comma-separated fields");
    }
    auto x = parse_double(trim(t.substr(0, comma)));
    auto y = parse_double(trim(t.substr(comma + 1)));
    if (!x || !y) fail(path, line_no, "non-numeric coordinate");
    points.push_back({*x, *y});
  }
  if (!header_seen) fail(path, line_no, "missing header 'x,y'");
  return points;
}

void write_points_csv(std::span<const Point> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write point file " + path.string());
  out << "x,y\n";
  for (const auto& p : points) out << format_double(p.x) << ',' << format_double(p.y) << '\n';
  if (!out) throw DataError("failed writing point file " + path.string());
}

CovariateStack read_stack_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".asc") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .asc covariate grids in " + dir.string());
  CovariateStack stack;
  for (const auto& f : files) stack.add(f.stem().string(), read_ascii_grid(f));
  return stack;
}

void write_stack_dir(const CovariateStack& stack, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& name : stack.names()) write_ascii_grid(stack.get(name), dir / (name + ".asc"));
}

}  // namespace slidepp
