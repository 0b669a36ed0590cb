#pragma once

#include <map>
#include <string>
#include <vector>

#include "safepatch/denoiser.hpp"
#include "safepatch/patch.hpp"

namespace safepatch {

enum class Precision : uint8_t { f64 = 0, f32 = 1 };

// Container layout (all integers little-endian):
//   magic "SPC1"
//   u32 version (1)
//   u8 precision (0 = f64, 1 = f32)
//   u32 tensor count
//   per tensor: u16 name length, name bytes, u8 rank, u64 extents[rank],
//               raw data (8 or 4 bytes per value)
//   u32 meta count
//   per entry: u16 key length, key, u32 value length, value
//   u64 FNV-1a checksum over everything after the magic
// The "kind" meta key distinguishes base / patch / merged-patch / images.
struct Container {
    Precision precision = Precision::f64;
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::map<std::string, std::string> meta;

    const Tensor* find(const std::string& name) const;
};

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

// Typed wrappers. Readers validate the kind tag and reconstruct the object,
// failing on missing/extra/mis-shaped tensors.
void save_base(const std::string& path, DenoiserParams& base, const NoiseSchedule& schedule,
               Precision precision = Precision::f64);
DenoiserParams load_base(const std::string& path, NoiseSchedule* schedule_out = nullptr);

void save_patch(const std::string& path, PatchParams& patch, Precision precision = Precision::f64);
PatchParams load_patch(const std::string& path);

void save_images(const std::string& path, const std::vector<Tensor>& images,
                 Precision precision = Precision::f64);
std::vector<Tensor> load_images(const std::string& path);

} // namespace safepatch
