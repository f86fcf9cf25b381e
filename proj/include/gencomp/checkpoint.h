// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "gencomp/diffusion.h"
#include "gencomp/model.h"

namespace gencomp {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  ScheduleKind schedule = ScheduleKind::kLinear;
};

struct LoadedCheckpoint {
  std::unique_ptr<DiT<float>> model;
  CheckpointMeta meta;
};

// "GCMP" | u32 version | u32 len + UTF-8 JSON header | u32 count |
// per tensor: u32 len + name, u32 rows, u32 cols, f32 LE values.
void SaveCheckpoint(const DiT<float>& model, const CheckpointMeta& meta,
                    const std::filesystem::path& path);
LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace gencomp
