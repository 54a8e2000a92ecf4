#include "csc/io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace csc {

Digest sha256(const uint8_t* data, size_t len) {
  Digest d{};
  unsigned int out_len = 0;
  if (!EVP_Digest(data, len, d.data(), &out_len, EVP_sha256(), nullptr) || out_len != d.size())
    throw std::runtime_error("digest computation failed");
  return d;
}

std::string hex(const Digest& d) {
  static const char* k = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (uint8_t b : d) {
    s.push_back(k[b >> 4]);
    s.push_back(k[b & 0xf]);
  }
  return s;
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  if (f.bad()) throw std::runtime_error("read failed: " + path);
  return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

uint8_t quantize_intensity(double v) {
  if (!(v > 0.0)) return 0;  // also catches NaN
  if (v >= 255.0) return 255;
  const double r = std::nearbyint(v);  // default rounding: half to even
  return static_cast<uint8_t>(r);
}

// ---------------------------------------------------------------- PGM

namespace {

// Next token, skipping whitespace and '#' comment lines.
std::string pnm_token(const std::vector<uint8_t>& b, size_t& pos) {
  while (pos < b.size()) {
    if (std::isspace(b[pos])) {
      ++pos;
    } else if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos])) tok.push_back(static_cast<char>(b[pos++]));
  if (tok.empty()) throw std::runtime_error("truncated header");
  return tok;
}

int pnm_int(const std::vector<uint8_t>& b, size_t& pos) {
  const std::string t = pnm_token(b, pos);
  size_t used = 0;
  const int v = std::stoi(t, &used);
  if (used != t.size()) throw std::runtime_error("bad header number: " + t);
  return v;
}

}  // namespace

Image load_pgm(const std::string& path) {
  const std::vector<uint8_t> b = read_file(path);
  size_t pos = 0;
  if (pnm_token(b, pos) != "P5") throw std::runtime_error(path + ": not a binary PGM");
  const int w = pnm_int(b, pos);
  const int h = pnm_int(b, pos);
  const int maxval = pnm_int(b, pos);
  if (w <= 0 || h <= 0) throw std::runtime_error(path + ": bad dimensions");
  if (maxval <= 0 || maxval > 255)
    throw std::runtime_error(path + ": only 8-bit PGM is supported");
  ++pos;  // single whitespace after maxval
  if (b.size() - pos < static_cast<size_t>(w) * h)
    throw std::runtime_error(path + ": truncated pixel data");
  Image img(h, w);
  for (size_t i = 0; i < img.pixels(); ++i) img.data[i] = b[pos + i];
  return img;
}

void save_pgm(const Image& img, const std::string& path) {
  validate(img);
  std::vector<uint8_t> out;
  char head[64];
  const int n = std::snprintf(head, sizeof head, "P5\n%d %d\n255\n", img.width, img.height);
  out.insert(out.end(), head, head + n);
  out.reserve(out.size() + img.pixels());
  for (double v : img.data) out.push_back(quantize_intensity(v));
  write_file(path, out);
}

// ---------------------------------------------------------------- PNG

Image load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png reader init failed");
  }
  std::vector<uint8_t> rowbuf;
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error(path + ": png decode failed");
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth > 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error(path + ": only 8-bit PNG is supported");
  }
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int h = static_cast<int>(png_get_image_height(png, info));
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error(path + ": unsupported channel layout");
  }

  img = Image(h, w);
  rowbuf.resize(static_cast<size_t>(w) * channels);
  for (int r = 0; r < h; ++r) {
    png_read_row(png, rowbuf.data(), nullptr);
    if (channels == 1) {
      for (int c = 0; c < w; ++c) img.at(r, c) = rowbuf[c];
    } else {
      for (int c = 0; c < w; ++c) {
        const double rd = rowbuf[3 * c], gn = rowbuf[3 * c + 1], bl = rowbuf[3 * c + 2];
        img.at(r, c) = 0.299 * rd + 0.587 * gn + 0.114 * bl;
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

void save_png(const Image& img, const std::string& path) {
  validate(img);
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png writer init failed");
  }
  std::vector<uint8_t> row(img.width);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error(path + ": png encode failed");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) row[c] = quantize_intensity(img.at(r, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

namespace {

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

Image load_image(const std::string& path) {
  if (has_suffix(path, ".pgm")) return load_pgm(path);
  if (has_suffix(path, ".png")) return load_png(path);
  throw std::runtime_error(path + ": unsupported image extension (use .pgm or .png)");
}

void save_image(const Image& img, const std::string& path) {
  if (has_suffix(path, ".pgm")) return save_pgm(img, path);
  if (has_suffix(path, ".png")) return save_png(img, path);
  throw std::runtime_error(path + ": unsupported image extension (use .pgm or .png)");
}

// --------------------------------------------------------- containers

namespace {

constexpr uint16_t kFormatVersion = 1;

void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v & 0xff));
  b.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<uint8_t>& b, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Cursor {
  const std::vector<uint8_t>& b;
  size_t pos = 0;

  void need(size_t n) const {
    if (b.size() - pos < n) throw std::runtime_error("container truncated");
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(b[pos] | (b[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void magic(const char* m) {
    need(4);
    if (std::memcmp(b.data() + pos, m, 4) != 0) throw std::runtime_error("bad container magic");
    pos += 4;
  }
};

std::vector<int> model_budgets(const CascadeModel& model) {
  if (!model.config.budgets.empty()) return model.config.budgets;
  return std::vector<int>(model.config.levels, 4);
}

}  // namespace

std::vector<uint8_t> serialize_model(const CascadeModel& model) {
  const CascadeConfig& cfg = model.config;
  const int n = model.global_dict.dim();
  const int m = model.global_dict.size();
  if (n != cfg.patch * cfg.patch) throw std::runtime_error("model atom size disagrees with patch");
  if (m > 0xffff) throw std::runtime_error("too many atoms for the container");
  if (cfg.levels > 0xffff || cfg.patch > 0xffff || cfg.stride > 0xffff)
    throw std::runtime_error("config value out of container range");
  if (static_cast<int>(model.level_dims.size()) != cfg.levels)
    throw std::runtime_error("model missing level dims");
  const std::vector<int> budgets = model_budgets(model);

  std::vector<uint8_t> b;
  b.reserve(48 + static_cast<size_t>(cfg.levels) * 10 + static_cast<size_t>(n) * m * 8);
  b.insert(b.end(), {'C', 'S', 'C', 'D'});
  put_u16(b, kFormatVersion);
  put_u16(b, static_cast<uint16_t>(cfg.patch));
  put_u16(b, static_cast<uint16_t>(cfg.levels));
  put_u16(b, static_cast<uint16_t>(cfg.stride));
  put_u32(b, static_cast<uint32_t>(n));
  put_u32(b, static_cast<uint32_t>(m));
  for (int t : budgets) {
    if (t < 1 || t > 0xffff) throw std::runtime_error("budget out of container range");
    put_u16(b, static_cast<uint16_t>(t));
  }
  for (auto [h, w] : model.level_dims) {
    put_u32(b, static_cast<uint32_t>(h));
    put_u32(b, static_cast<uint32_t>(w));
  }
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) put_f64(b, model.global_dict.atoms(i, j));
  return b;
}

CascadeModel deserialize_model(const std::vector<uint8_t>& bytes) {
  Cursor c{bytes};
  c.magic("CSCD");
  if (c.u16() != kFormatVersion) throw std::runtime_error("unsupported model version");
  CascadeModel model;
  CascadeConfig& cfg = model.config;
  cfg.patch = c.u16();
  cfg.levels = c.u16();
  cfg.stride = c.u16();
  const uint32_t n = c.u32();
  const uint32_t m = c.u32();
  if (cfg.patch < 2 || cfg.levels < 1 || cfg.stride < 1)
    throw std::runtime_error("model header out of range");
  if (n != static_cast<uint32_t>(cfg.patch) * cfg.patch)
    throw std::runtime_error("atom size disagrees with patch size");
  if (m < n) throw std::runtime_error("dictionary in container is undercomplete");

  cfg.budgets.resize(cfg.levels);
  for (int i = 0; i < cfg.levels; ++i) {
    cfg.budgets[i] = c.u16();
    if (cfg.budgets[i] < 1) throw std::runtime_error("budget out of range");
  }
  cfg.global_atoms = static_cast<int>(m);
  for (int i = 0; i < cfg.levels; ++i) {
    const uint32_t h = c.u32();
    const uint32_t w = c.u32();
    model.level_dims.emplace_back(static_cast<int>(h), static_cast<int>(w));
  }
  for (int i = 1; i < cfg.levels; ++i) {
    const auto [ph, pw] = model.level_dims[i - 1];
    if (model.level_dims[i] != std::make_pair((ph + 1) / 2, (pw + 1) / 2))
      throw std::runtime_error("level dims are not a halving ladder");
  }
  {
    const auto [ch, cw] = model.level_dims.back();
    if (ch < cfg.patch || cw < cfg.patch)
      throw std::runtime_error("coarsest level smaller than one patch");
  }

  Eigen::MatrixXd atoms(n, m);
  for (uint32_t j = 0; j < m; ++j)
    for (uint32_t i = 0; i < n; ++i) atoms(i, j) = c.f64();
  if (c.pos != bytes.size()) throw std::runtime_error("trailing bytes in model container");
  model.global_dict = make_dictionary(std::move(atoms));
  return model;
}

void save_model(const CascadeModel& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

CascadeModel load_model(const std::string& path, Digest* digest_out) {
  const std::vector<uint8_t> bytes = read_file(path);
  if (digest_out) *digest_out = sha256(bytes.data(), bytes.size());
  return deserialize_model(bytes);
}

namespace {

// Grids the model implies for its own pyramid geometry, coarsest first.
std::vector<PatchGrid> model_grids(const CascadeModel& model) {
  std::vector<PatchGrid> grids;
  for (int n = model.config.levels - 1; n >= 0; --n) {
    const auto [h, w] = model.level_dims[n];
    grids.push_back(make_grid(h, w, model.config.patch, model.config.stride));
  }
  return grids;
}

}  // namespace

std::vector<uint8_t> serialize_codes(const LayerCodes& codes, const CascadeModel& model,
                                     const Digest& model_digest) {
  const std::vector<PatchGrid> grids = model_grids(model);
  if (codes.levels.size() != grids.size())
    throw std::runtime_error("code level count does not match model");
  for (size_t i = 0; i < grids.size(); ++i) {
    const PatchGrid& g = codes.levels[i].grid;
    if (g.image_h != grids[i].image_h || g.image_w != grids[i].image_w ||
        g.patch != grids[i].patch || g.stride != grids[i].stride)
      throw std::runtime_error(
          "codes were made for a different pyramid than the model records; "
          "the code container stores no geometry of its own");
    if (codes.levels[i].codes.columns.size() != grids[i].count())
      throw std::runtime_error("patch count does not match grid");
  }

  const int m = model.global_dict.size();
  const int n = model.global_dict.dim();
  std::vector<uint8_t> b;
  b.insert(b.end(), {'C', 'S', 'C', 'C'});
  put_u16(b, kFormatVersion);
  b.insert(b.end(), model_digest.begin(), model_digest.end());
  put_u16(b, static_cast<uint16_t>(codes.levels.size()));
  for (const LevelCode& lc : codes.levels) put_u32(b, static_cast<uint32_t>(lc.codes.columns.size()));
  for (const LevelCode& lc : codes.levels) {
    for (const ColumnCode& col : lc.codes.columns) {
      if (static_cast<int>(col.size()) > std::min(n, 255))
        throw std::runtime_error("support too long for the container");
      b.push_back(static_cast<uint8_t>(col.size()));
      for (const CodeEntry& e : col) {
        if (e.atom < 0 || e.atom >= m) throw std::runtime_error("atom index out of range");
        put_u16(b, static_cast<uint16_t>(e.atom));
        put_f64(b, e.coef);
      }
    }
  }
  return b;
}

LayerCodes deserialize_codes(const std::vector<uint8_t>& bytes, const CascadeModel& model,
                             const Digest& model_digest) {
  Cursor c{bytes};
  c.magic("CSCC");
  if (c.u16() != kFormatVersion) throw std::runtime_error("unsupported codes version");
  c.need(32);
  Digest stored;
  std::memcpy(stored.data(), bytes.data() + c.pos, 32);
  c.pos += 32;
  if (stored != model_digest)
    throw std::runtime_error("codes were produced with a different model (digest mismatch)");

  const std::vector<PatchGrid> grids = model_grids(model);
  const uint16_t levels = c.u16();
  if (levels != grids.size()) throw std::runtime_error("code level count does not match model");
  std::vector<uint32_t> counts(levels);
  for (auto& v : counts) v = c.u32();
  for (size_t i = 0; i < grids.size(); ++i)
    if (counts[i] != grids[i].count())
      throw std::runtime_error("patch count does not match model geometry");

  const int m = model.global_dict.size();
  const int n = model.global_dict.dim();
  LayerCodes out;
  out.levels.resize(levels);
  for (size_t i = 0; i < grids.size(); ++i) {
    out.levels[i].grid = grids[i];
    out.levels[i].codes.columns.resize(counts[i]);
    for (uint32_t k = 0; k < counts[i]; ++k) {
      c.need(1);
      const int len = c.b[c.pos++];
      if (len > std::min(n, 255)) throw std::runtime_error("support longer than patch dimension");
      ColumnCode& col = out.levels[i].codes.columns[k];
      col.resize(len);
      for (int e = 0; e < len; ++e) {
        const int atom = c.u16();
        const double coef = c.f64();
        if (atom >= m) throw std::runtime_error("atom index out of range");
        if (!std::isfinite(coef)) throw std::runtime_error("non-finite coefficient");
        col[e] = {atom, coef};
      }
    }
  }
  if (c.pos != bytes.size()) throw std::runtime_error("trailing bytes in codes container");
  return out;
}

void save_codes(const LayerCodes& codes, const CascadeModel& model, const Digest& model_digest,
                const std::string& path) {
  write_file(path, serialize_codes(codes, model, model_digest));
}

LayerCodes load_codes(const std::string& path, const CascadeModel& model,
                      const Digest& model_digest) {
  return deserialize_codes(read_file(path), model, model_digest);
}

}  // namespace csc
