#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "csc/apps.hpp"
#include "csc/io.hpp"
#include "doctest.h"

using namespace csc;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

struct FileGuard {
  std::string path;
  explicit FileGuard(std::string p) : path(std::move(p)) {}
  ~FileGuard() { std::remove(path.c_str()); }
};

Image random_bytes_image(int h, int w, uint64_t seed) {
  Image img(h, w);
  std::mt19937_64 rng(seed);
  for (auto& v : img.data) v = static_cast<double>(rng() % 256);
  return img;
}

// Minimal RGB PNG writer so the loader's color path can be exercised
// without adding color support to the library itself.
void write_rgb_png(const std::string& path, int h, int w,
                   const std::vector<uint8_t>& rgb) {
  FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < h; ++r)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<size_t>(r) * w * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

void write_gray16_png(const std::string& path, int h, int w) {
  FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(static_cast<size_t>(w) * 2, 0x42);
  for (int r = 0; r < h; ++r) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

CascadeModel tiny_model() {
  CascadeConfig cfg;
  cfg.levels = 2;
  cfg.patch = 4;
  cfg.stride = 3;
  cfg.budgets = {2, 3};
  cfg.global_atoms = 16;
  cfg.train.iterations = 2;
  const Image img = random_bytes_image(24, 20, 5);
  return train_cascade(img, cfg);
}

}  // namespace

TEST_CASE("quantization clamps and rounds half to even") {
  CHECK(quantize_intensity(-3.0) == 0);
  CHECK(quantize_intensity(0.0) == 0);
  CHECK(quantize_intensity(100.2) == 100);
  CHECK(quantize_intensity(99.7) == 100);
  CHECK(quantize_intensity(126.5) == 126);
  CHECK(quantize_intensity(127.5) == 128);
  CHECK(quantize_intensity(254.99) == 255);
  CHECK(quantize_intensity(255.0) == 255);
  CHECK(quantize_intensity(900.0) == 255);
  CHECK(quantize_intensity(std::nan("")) == 0);
}

TEST_CASE("pgm round trip preserves every byte") {
  const Image img = random_bytes_image(13, 17, 1);
  FileGuard g(temp_path("io_roundtrip.pgm"));
  save_pgm(img, g.path);
  const Image back = load_pgm(g.path);
  REQUIRE(back.same_size(img));
  for (size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("pgm loader understands comments and rejects 16-bit data") {
  FileGuard g(temp_path("io_hand.pgm"));
  {
    const std::string text = "P5\n# a comment line\n3 2\n# another\n255\n";
    std::vector<uint8_t> bytes(text.begin(), text.end());
    for (uint8_t v : {10, 20, 30, 40, 50, 60}) bytes.push_back(v);
    write_file(g.path, bytes);
  }
  const Image img = load_pgm(g.path);
  REQUIRE(img.height == 2);
  REQUIRE(img.width == 3);
  CHECK(img.at(0, 0) == 10.0);
  CHECK(img.at(1, 2) == 60.0);

  {
    const std::string text = "P5\n3 2\n65535\n";
    std::vector<uint8_t> bytes(text.begin(), text.end());
    bytes.resize(bytes.size() + 12, 0);
    write_file(g.path, bytes);
  }
  CHECK_THROWS(load_pgm(g.path));
}

TEST_CASE("png round trip preserves every byte") {
  const Image img = random_bytes_image(21, 10, 2);
  FileGuard g(temp_path("io_roundtrip.png"));
  save_png(img, g.path);
  const Image back = load_png(g.path);
  REQUIRE(back.same_size(img));
  for (size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);

  SUBCASE("extension dispatch agrees") {
    const Image via = load_image(g.path);
    CHECK(via.same_size(back));
    CHECK_THROWS(load_image(temp_path("io_roundtrip.bmp")));
  }
}

TEST_CASE("color png converts by luma weights") {
  FileGuard g(temp_path("io_color.png"));
  // two pixels: pure red and pure white
  write_rgb_png(g.path, 1, 2, {255, 0, 0, 255, 255, 255});
  const Image img = load_png(g.path);
  REQUIRE(img.height == 1);
  REQUIRE(img.width == 2);
  CHECK(std::abs(img.at(0, 0) - 0.299 * 255.0) <= 0.5);
  CHECK(img.at(0, 1) == 255.0);
}

TEST_CASE("16-bit png is rejected") {
  FileGuard g(temp_path("io_deep.png"));
  write_gray16_png(g.path, 4, 4);
  CHECK_THROWS(load_png(g.path));
}

TEST_CASE("model round trip is byte-identical") {
  const CascadeModel model = tiny_model();
  const std::vector<uint8_t> bytes = serialize_model(model);
  const CascadeModel back = deserialize_model(bytes);

  CHECK(back.config.levels == model.config.levels);
  CHECK(back.config.patch == model.config.patch);
  CHECK(back.config.stride == model.config.stride);
  CHECK(back.config.budgets == model.config.budgets);
  CHECK(back.config.global_atoms == model.config.global_atoms);
  CHECK(back.level_dims == model.level_dims);
  CHECK((back.global_dict.atoms - model.global_dict.atoms).cwiseAbs().maxCoeff() == 0.0);

  const std::vector<uint8_t> twice = serialize_model(back);
  CHECK(twice == bytes);

  SUBCASE("the documented size arithmetic holds") {
    // 4 + 2 + 2*3 + 4*2 + 2*levels + 8*levels + 8*n*m
    const size_t expect = 4 + 2 + 6 + 8 + 2ull * model.config.levels +
                          8ull * model.config.levels +
                          8ull * model.global_dict.dim() * model.global_dict.size();
    CHECK(bytes.size() == expect);
  }

  SUBCASE("an eight-by-eight four-level model of 256 atoms is 131132 bytes") {
    CascadeConfig cfg;
    cfg.levels = 4;
    cfg.patch = 8;
    cfg.stride = 7;
    cfg.global_atoms = 256;
    cfg.train.iterations = 1;
    const CascadeModel big = train_cascade(random_bytes_image(96, 96, 9), cfg);
    CHECK(serialize_model(big).size() == 131132);
  }

  SUBCASE("file round trip and digest") {
    FileGuard g(temp_path("io_model.cscd"));
    save_model(model, g.path);
    Digest d{};
    const CascadeModel loaded = load_model(g.path, &d);
    CHECK(loaded.level_dims == model.level_dims);
    const std::vector<uint8_t> raw = read_file(g.path);
    CHECK(d == sha256(raw.data(), raw.size()));
    CHECK(hex(d).size() == 64);
  }
}

TEST_CASE("model deserialization rejects corruption") {
  const CascadeModel model = tiny_model();
  std::vector<uint8_t> bytes = serialize_model(model);

  std::vector<uint8_t> bad = bytes;
  bad[0] = 'X';  // magic
  CHECK_THROWS(deserialize_model(bad));

  bad = bytes;
  bad[4] = 0xff;  // version
  CHECK_THROWS(deserialize_model(bad));

  bad = bytes;
  bad.push_back(0);  // trailing garbage
  CHECK_THROWS(deserialize_model(bad));

  bad = bytes;
  bad.resize(bytes.size() - 3);  // truncated atoms
  CHECK_THROWS(deserialize_model(bad));

  bad = bytes;
  bad[bytes.size() - 1] ^= 0x40;  // denormalized atom column
  CHECK_THROWS(deserialize_model(bad));
}

TEST_CASE("codes round trip against their model") {
  const CascadeModel model = tiny_model();
  const std::vector<uint8_t> mbytes = serialize_model(model);
  const Digest digest = sha256(mbytes.data(), mbytes.size());

  const Image img = random_bytes_image(24, 20, 6);
  const CodingResult coded = code_image(img, model, budget_rules(model.config));

  const std::vector<uint8_t> bytes = serialize_codes(coded.codes, model, digest);
  const LayerCodes back = deserialize_codes(bytes, model, digest);

  REQUIRE(back.levels.size() == coded.codes.levels.size());
  for (size_t i = 0; i < back.levels.size(); ++i) {
    CHECK(back.levels[i].codes.columns == coded.codes.levels[i].codes.columns);
    CHECK(back.levels[i].grid.image_h == coded.codes.levels[i].grid.image_h);
    CHECK(back.levels[i].grid.image_w == coded.codes.levels[i].grid.image_w);
  }

  // decoding the reloaded codes reproduces the reconstruction exactly
  const Image redecoded = decode(back, model);
  for (size_t i = 0; i < redecoded.data.size(); ++i)
    CHECK(redecoded.data[i] == coded.reconstruction.data[i]);

  SUBCASE("file round trip") {
    FileGuard g(temp_path("io_codes.cscc"));
    save_codes(coded.codes, model, digest, g.path);
    const LayerCodes loaded = load_codes(g.path, model, digest);
    CHECK(loaded.levels.size() == coded.codes.levels.size());
  }

  SUBCASE("a different model digest is refused") {
    Digest other = digest;
    other[0] ^= 1;
    CHECK_THROWS_WITH_AS(deserialize_codes(bytes, model, other),
                         doctest::Contains("digest"), std::runtime_error);
  }

  SUBCASE("codes for a mismatched pyramid are refused") {
    const Image wrong = random_bytes_image(32, 32, 7);
    const CodingResult other = code_image(wrong, model, budget_rules(model.config));
    CHECK_THROWS(serialize_codes(other.codes, model, digest));
  }

  SUBCASE("corrupted code bytes are refused") {
    std::vector<uint8_t> bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS(deserialize_codes(bad, model, digest));

    bad = bytes;
    bad.push_back(9);
    CHECK_THROWS(deserialize_codes(bad, model, digest));
  }
}
