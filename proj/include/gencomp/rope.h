// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace gencomp {

enum class Axis { kT = 0, kH = 1, kW = 2 };

std::string_view AxisName(Axis axis);

struct GridCoord {
  int t = 0;
  int h = 0;
  int w = 0;
  int operator[](Axis a) const { return a == Axis::kT ? t : (a == Axis::kH ? h : w); }
  int& operator[](Axis a) { return a == Axis::kT ? t : (a == Axis::kH ? h : w); }
  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

struct GridExtents {
  int t = 0;
  int h = 0;
  int w = 0;
  int operator[](Axis a) const { return a == Axis::kT ? t : (a == Axis::kH ? h : w); }
  int& operator[](Axis a) { return a == Axis::kT ? t : (a == Axis::kH ? h : w); }
  friend bool operator==(const GridExtents&, const GridExtents&) = default;
};

// (t, h, w) position label per token.
struct PositionGrid {
  std::vector<GridCoord> coords;
  GridExtents extents;

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }
};

// Row-major (t, then h, then w) enumeration.
PositionGrid BuildGrid(int t_tokens, int h_tokens, int w_tokens);

// Foreground labels pushed past the background's extent on `axis`, so the two
// streams never share a label on that axis. Adds no parameters.
PositionGrid ExtendGridErope(const PositionGrid& bg, const PositionGrid& fg, Axis axis);

PositionGrid ConcatGrids(const PositionGrid& a, const PositionGrid& b);

// True when no value of `axis` appears in both grids.
bool GridsDisjointOnAxis(const PositionGrid& a, const PositionGrid& b, Axis axis);

// Frequency layout of 3-D rotary embedding for one attention head. The head
// dimension is split into contiguous (t, h, w) bands, each rotated in
// adjacent pairs with geometric frequencies base^(-2i/band).
struct RotaryTable {
  int head_dim = 0;
  double base = 10000.0;
  std::array<int, 3> axis_dims{};  // t, h, w

  friend bool operator==(const RotaryTable&, const RotaryTable&) = default;
};

// Splits head_dim roughly (1/4, 3/8, 3/8) across (t, h, w), each even.
RotaryTable MakeRotaryTable(int head_dim, double base = 10000.0);

// Per-token rotation angles, N x head_dim/2, pair-major within each band.
std::vector<double> RotaryAngles(const PositionGrid& grid, const RotaryTable& table);

// Rotates consecutive head_dim-long vectors in place. Each token owns
// `heads` consecutive vectors that share one row of `angles`. `inverse`
// applies the transpose rotation.
template <typename T>
void RotateInPlace(std::span<T> vectors, std::span<const double> angles, int head_dim,
                   bool inverse = false, int heads = 1);

// Convenience form used by tests and tools: returns rotated copies.
std::vector<double> ApplyRotary(std::span<const double> vectors, const PositionGrid& grid,
                                const RotaryTable& table);

}  // namespace gencomp
