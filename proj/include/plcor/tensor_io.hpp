// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "plcor/voxelizer.hpp"

namespace plcor {

// Text dump of an occupancy tensor: a grid header, then one "ix iy iz value"
// line per stored bin in lexicographic (ix, iy, iz) order. Values print with
// max_digits10 precision so a dump/load cycle is value-exact.
//
//   # plcor occupancy tensor v1
//   # origin <x> <y> <z>
//   # bin_size <wx> <wy> <wz>
//   # counts <nx> <ny> <nz>
//   # sigma_sq <s>
//   # neighborhood none|cube26
//   # entries <n>
//   <ix> <iy> <iz> <value>
//   ...

inline void dump_tensor(std::ostream& out, const OccupancyTensor& tensor) {
  const GridSpec& g = tensor.grid;
  char buf[256];
  out << "# plcor occupancy tensor v1\n";
  std::snprintf(buf, sizeof buf, "# origin %.17g %.17g %.17g\n", g.origin.x, g.origin.y,
                g.origin.z);
  out << buf;
  std::snprintf(buf, sizeof buf, "# bin_size %.17g %.17g %.17g\n", g.bin_size.x, g.bin_size.y,
                g.bin_size.z);
  out << buf;
  std::snprintf(buf, sizeof buf, "# counts %d %d %d\n", g.counts[0], g.counts[1], g.counts[2]);
  out << buf;
  std::snprintf(buf, sizeof buf, "# sigma_sq %.17g\n", g.sigma_sq);
  out << buf;
  out << "# neighborhood " << (g.neighborhood == Neighborhood::cube26 ? "cube26" : "none")
      << "\n";
  out << "# entries " << tensor.entries.size() << "\n";
  for (const BinEntry& e : tensor.entries) {
    auto i = g.decompose(e.bin);
    std::snprintf(buf, sizeof buf, "%d %d %d %.17g\n", i[0], i[1], i[2], e.value);
    out << buf;
  }
}

inline void dump_tensor(const std::string& path, const OccupancyTensor& tensor) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("dump_tensor: cannot open '" + path + "' for writing");
  dump_tensor(out, tensor);
  out.flush();
  if (!out) throw io_error("dump_tensor: write failure on '" + path + "'");
}

inline OccupancyTensor load_tensor(std::istream& in) {
  OccupancyTensor tensor;
  GridSpec& g = tensor.grid;
  std::string line;
  int line_no = 0;
  std::size_t declared = 0;
  bool saw_header = false;

  auto fail = [&](const std::string& what) {
    throw validation_error("load_tensor: line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tag;
      hs >> tag;
      if (tag == "plcor") {
        saw_header = true;
      } else if (tag == "origin") {
        if (!(hs >> g.origin.x >> g.origin.y >> g.origin.z)) fail("bad origin");
      } else if (tag == "bin_size") {
        if (!(hs >> g.bin_size.x >> g.bin_size.y >> g.bin_size.z)) fail("bad bin_size");
      } else if (tag == "counts") {
        if (!(hs >> g.counts[0] >> g.counts[1] >> g.counts[2])) fail("bad counts");
      } else if (tag == "sigma_sq") {
        if (!(hs >> g.sigma_sq)) fail("bad sigma_sq");
      } else if (tag == "neighborhood") {
        std::string n;
        hs >> n;
        if (n == "cube26")
          g.neighborhood = Neighborhood::cube26;
        else if (n == "none")
          g.neighborhood = Neighborhood::none;
        else
          fail("unknown neighborhood '" + n + "'");
      } else if (tag == "entries") {
        if (!(hs >> declared)) fail("bad entry count");
      }
      continue;
    }
    std::istringstream es(line);
    int ix, iy, iz;
    double value;
    if (!(es >> ix >> iy >> iz >> value)) fail("malformed entry");
    if (ix < 0 || iy < 0 || iz < 0 || ix >= g.counts[0] || iy >= g.counts[1] ||
        iz >= g.counts[2])
      fail("bin index out of grid");
    tensor.entries.push_back({g.linear_index(ix, iy, iz), value});
  }
  if (!saw_header) throw validation_error("load_tensor: missing tensor header");
  g.validate();
  if (tensor.entries.size() != declared)
    throw validation_error("load_tensor: header declares " + std::to_string(declared) +
                           " entries, found " + std::to_string(tensor.entries.size()));
  for (std::size_t i = 1; i < tensor.entries.size(); ++i)
    if (tensor.entries[i].bin <= tensor.entries[i - 1].bin)
      throw validation_error("load_tensor: entries not in ascending bin order");
  return tensor;
}

inline OccupancyTensor load_tensor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("load_tensor: cannot open '" + path + "'");
  return load_tensor(in);
}

}  // namespace plcor
