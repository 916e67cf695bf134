#pragma once

#include <stbn/percept.h>
#include <stbn/sequence.h>

#include <filesystem>
#include <vector>

namespace stbn {

// Single-channel PFM ("Pf"), little-endian, rows stored bottom to top.
void write_pfm(const std::filesystem::path &path, const Image2D &img);
Image2D read_pfm(const std::filesystem::path &path);

// One PFM per frame: <prefix>_000.pfm, <prefix>_001.pfm, ...
std::vector<std::filesystem::path> write_pfm_stack(const std::filesystem::path &prefix, const FrameSequence &seq);
FrameSequence read_pfm_stack(const std::filesystem::path &prefix);

// 8-bit grayscale PNG of log(1 + p / mean(p)), scaled to the maximum.
void write_spectrum_png(const std::filesystem::path &path, const SpectrumImage &spec);

}  // namespace stbn
