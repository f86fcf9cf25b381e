// SPDX-License-Identifier: Apache-2.0
#include "gencomp/rope.h"

#include <algorithm>
#include <cmath>

#include "gencomp/error.h"

namespace gencomp {

std::string_view AxisName(Axis axis) {
  switch (axis) {
    case Axis::kT:
      return "t";
    case Axis::kH:
      return "h";
    case Axis::kW:
      return "w";
  }
  return "?";
}

PositionGrid BuildGrid(int t_tokens, int h_tokens, int w_tokens) {
  if (t_tokens < 1 || h_tokens < 1 || w_tokens < 1) {
    throw InvalidInput("grid extents must be >= 1");
  }
  PositionGrid grid;
  grid.extents = {t_tokens, h_tokens, w_tokens};
  grid.coords.reserve(static_cast<std::size_t>(t_tokens) * h_tokens * w_tokens);
  for (int t = 0; t < t_tokens; ++t) {
    for (int h = 0; h < h_tokens; ++h) {
      for (int w = 0; w < w_tokens; ++w) grid.coords.push_back({t, h, w});
    }
  }
  return grid;
}

PositionGrid ExtendGridErope(const PositionGrid& bg, const PositionGrid& fg, Axis axis) {
  PositionGrid out = fg;
  const int offset = bg.extents[axis];
  for (auto& c : out.coords) c[axis] += offset;
  if (!out.empty()) out.extents[axis] += offset;
  return out;
}

PositionGrid ConcatGrids(const PositionGrid& a, const PositionGrid& b) {
  PositionGrid out = a;
  out.coords.insert(out.coords.end(), b.coords.begin(), b.coords.end());
  for (const auto& c : b.coords) {
    out.extents.t = std::max(out.extents.t, c.t + 1);
    out.extents.h = std::max(out.extents.h, c.h + 1);
    out.extents.w = std::max(out.extents.w, c.w + 1);
  }
  return out;
}

bool GridsDisjointOnAxis(const PositionGrid& a, const PositionGrid& b, Axis axis) {
  int hi = 0;
  for (const auto& c : a.coords) hi = std::max(hi, c[axis]);
  for (const auto& c : b.coords) hi = std::max(hi, c[axis]);
  std::vector<bool> seen(static_cast<std::size_t>(hi) + 1, false);
  for (const auto& c : a.coords) seen[static_cast<std::size_t>(c[axis])] = true;
  return std::none_of(b.coords.begin(), b.coords.end(),
                      [&](const GridCoord& c) { return seen[static_cast<std::size_t>(c[axis])]; });
}

RotaryTable MakeRotaryTable(int head_dim, double base) {
  if (head_dim < 6 || head_dim % 2 != 0) {
    throw InvalidInput("rotary head_dim must be even and >= 6");
  }
  auto even_floor = [](double v) { return std::max(2, 2 * static_cast<int>(v / 2.0)); };
  RotaryTable table;
  table.head_dim = head_dim;
  table.base = base;
  const int t = even_floor(head_dim / 4.0);
  const int h = even_floor(3.0 * head_dim / 8.0);
  table.axis_dims = {t, h, head_dim - t - h};
  return table;
}

std::vector<double> RotaryAngles(const PositionGrid& grid, const RotaryTable& table) {
  const int half = table.head_dim / 2;
  std::vector<double> angles(grid.size() * static_cast<std::size_t>(half));
  std::vector<double> freqs;
  std::vector<Axis> owner;
  for (int a = 0; a < 3; ++a) {
    const int dim = table.axis_dims[static_cast<std::size_t>(a)];
    for (int i = 0; i < dim / 2; ++i) {
      freqs.push_back(std::pow(table.base, -2.0 * i / dim));
      owner.push_back(static_cast<Axis>(a));
    }
  }
  for (std::size_t n = 0; n < grid.size(); ++n) {
    for (int p = 0; p < half; ++p) {
      angles[n * half + p] = grid.coords[n][owner[p]] * freqs[p];
    }
  }
  return angles;
}

template <typename T>
void RotateInPlace(std::span<T> vectors, std::span<const double> angles, int head_dim,
                   bool inverse, int heads) {
  const int half = head_dim / 2;
  const std::size_t n = vectors.size() / head_dim;
  for (std::size_t i = 0; i < n; ++i) {
    T* v = vectors.data() + i * head_dim;
    const double* a = angles.data() + (i / static_cast<std::size_t>(heads)) * half;
    for (int p = 0; p < half; ++p) {
      const T c = static_cast<T>(std::cos(a[p]));
      const T s = static_cast<T>(inverse ? -std::sin(a[p]) : std::sin(a[p]));
      const T x0 = v[2 * p];
      const T x1 = v[2 * p + 1];
      v[2 * p] = x0 * c - x1 * s;
      v[2 * p + 1] = x0 * s + x1 * c;
    }
  }
}

template void RotateInPlace<float>(std::span<float>, std::span<const double>, int, bool, int);
template void RotateInPlace<double>(std::span<double>, std::span<const double>, int, bool, int);

std::vector<double> ApplyRotary(std::span<const double> vectors, const PositionGrid& grid,
                                const RotaryTable& table) {
  if (vectors.size() != grid.size() * static_cast<std::size_t>(table.head_dim)) {
    throw InvalidInput("rotary: vector count does not match grid");
  }
  std::vector<double> out(vectors.begin(), vectors.end());
  const auto angles = RotaryAngles(grid, table);
  RotateInPlace<double>(out, angles, table.head_dim);
  return out;
}

}  // namespace gencomp
