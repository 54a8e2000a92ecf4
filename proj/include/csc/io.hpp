#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "csc/cascade.hpp"

namespace csc {

using Digest = std::array<uint8_t, 32>;

Digest sha256(const uint8_t* data, size_t len);
std::string hex(const Digest& d);

// Binary PGM (P5, maxval <= 255) and 8-bit PNG. Gray PNG loads directly;
// color converts by the BT.601 luma weights; 16-bit inputs are rejected.
// Writers clamp to [0,255] and round half to even.
Image load_pgm(const std::string& path);
void save_pgm(const Image& img, const std::string& path);
Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path);

// Dispatch on the file extension (.pgm / .png).
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

uint8_t quantize_intensity(double v);  // clamp + round half to even

// Model container. All integers little-endian:
//   magic "CSCD" | version u16 | patch u16 | levels u16 | stride u16 |
//   n u32 | m u32 | budgets u16 x levels | dims (u32 h, u32 w) x levels
//   (finest first) | atoms f64 x n*m, column-major.
std::vector<uint8_t> serialize_model(const CascadeModel& model);
CascadeModel deserialize_model(const std::vector<uint8_t>& bytes);
void save_model(const CascadeModel& model, const std::string& path);
// digest_out, when non-null, receives the digest of the raw file bytes.
CascadeModel load_model(const std::string& path, Digest* digest_out = nullptr);

// Code container, bound to a model by digest:
//   magic "CSCC" | version u16 | model digest 32 bytes | levels u16 |
//   per level (coarsest first): count u32, then per patch: len u8,
//   then len x (atom u16 | coef f64).
// Codes serialize only for images whose pyramid matches the model dims
// (the format records no geometry of its own).
std::vector<uint8_t> serialize_codes(const LayerCodes& codes, const CascadeModel& model,
                                     const Digest& model_digest);
LayerCodes deserialize_codes(const std::vector<uint8_t>& bytes, const CascadeModel& model,
                             const Digest& model_digest);
void save_codes(const LayerCodes& codes, const CascadeModel& model, const Digest& model_digest,
                const std::string& path);
LayerCodes load_codes(const std::string& path, const CascadeModel& model,
                      const Digest& model_digest);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace csc
