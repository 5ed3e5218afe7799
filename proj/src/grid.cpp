#include "stwind/grid.hpp"

#include "stwind/error.hpp"
#include "stwind/text_io.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <string>

namespace stwind {

std::optional<CellIndex> GridGeometry::locate(Point p) const {
  const double fc = std::floor((p.x - xll) / cellsize);
  const double fy = std::floor((p.y - yll) / cellsize);
  if (!(fc >= 0 && fy >= 0 && fc < static_cast<double>(ncols) && fy < static_cast<double>(nrows)))
    return std::nullopt;
  return CellIndex{nrows - 1 - static_cast<std::size_t>(fy), static_cast<std::size_t>(fc)};
}

Grid read_ascii_grid(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::map<std::string, double> header;
  bool center_x = false;
  bool center_y = false;
  std::string line;
  std::streampos data_start = in.tellg();
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) {
      data_start = in.tellg();
      continue;
    }
    if (!std::isalpha(static_cast<unsigned char>(t.front()))) break;
    std::istringstream ls{std::string(t)};
    std::string key;
    std::string value;
    ls >> key >> value;
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto v = parse_double(value);
    if (!v) fail(ErrorKind::schema, path.string() + ": bad header value for '" + key + "'");
    if (key == "xllcenter") center_x = true;
    if (key == "yllcenter") center_y = true;
    if (key == "xllcenter") key = "xllcorner";
    if (key == "yllcenter") key = "yllcorner";
    header[key] = *v;
    data_start = in.tellg();
  }
  for (const char* required : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize"})
    if (!header.contains(required))
      fail(ErrorKind::schema, path.string() + ": missing header '" + required + "'");

  GridGeometry g;
  g.ncols = static_cast<std::size_t>(header["ncols"]);
  g.nrows = static_cast<std::size_t>(header["nrows"]);
  g.cellsize = header["cellsize"];
  if (g.cellsize <= 0 || g.ncols == 0 || g.nrows == 0)
    fail(ErrorKind::schema, path.string() + ": non-positive grid dimensions");
  g.xll = header["xllcorner"] - (center_x ? 0.5 * g.cellsize : 0.0);
  g.yll = header["yllcorner"] - (center_y ? 0.5 * g.cellsize : 0.0);

  Grid grid(g);
  grid.nodata = header.contains("nodata_value") ? header["nodata_value"] : -9999.0;

  in.clear();
  in.seekg(data_start);
  std::string token;
  std::size_t n = 0;
  while (in >> token) {
    if (n >= g.size()) fail(ErrorKind::schema, path.string() + ": more values than ncols*nrows");
    const auto v = parse_double(token);
    if (!v) fail(ErrorKind::schema, path.string() + ": unparseable value '" + token + "'");
    grid.values[n++] = (*v == grid.nodata) ? Grid::kMissing : *v;
  }
  if (n != g.size()) fail(ErrorKind::schema, path.string() + ": fewer values than ncols*nrows");
  return grid;
}

void write_ascii_grid(const std::filesystem::path& path, const Grid& grid) {
  auto out = open_output(path);
  const auto& g = grid.geometry;
  out << "ncols " << g.ncols << '\n'
      << "nrows " << g.nrows << '\n'
      << "xllcorner " << format_double(g.xll) << '\n'
      << "yllcorner " << format_double(g.yll) << '\n'
      << "cellsize " << format_double(g.cellsize) << '\n'
      << "NODATA_value " << format_double(grid.nodata) << '\n';
  for (std::size_t r = 0; r < g.nrows; ++r) {
    for (std::size_t c = 0; c < g.ncols; ++c) {
      const double v = grid.at(r, c);
      if (c) out << ' ';
      out << format_double(Grid::missing(v) ? grid.nodata : v);
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

} // namespace stwind
