#include <random>
#include <set>

#include "csc/patches.hpp"
#include "doctest.h"
#include "ref/reference.hpp"

using namespace csc;

namespace {

Image random_image(int h, int w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 255.0);
  Image img(h, w);
  for (double& v : img.data) v = dist(rng);
  return img;
}

}  // namespace

TEST_CASE("grid layouts for the pinned examples") {
  SUBCASE("image equal to one patch") {
    const PatchGrid g = make_grid(8, 8, 8, 1);
    REQUIRE(g.count() == 1);
    CHECK(g.locations[0] == std::make_pair(0, 0));
  }
  SUBCASE("stride 7 on a 9x9 image clamps the last start") {
    const PatchGrid g = make_grid(9, 9, 8, 7);
    REQUIRE(g.count() == 4);
    CHECK(g.locations[0] == std::make_pair(0, 0));
    CHECK(g.locations[1] == std::make_pair(0, 1));
    CHECK(g.locations[2] == std::make_pair(1, 0));
    CHECK(g.locations[3] == std::make_pair(1, 1));
  }
  SUBCASE("non-overlapping tiling") {
    const PatchGrid g = make_grid(16, 16, 8, 8);
    REQUIRE(g.count() == 4);
    CHECK(g.locations[3] == std::make_pair(8, 8));
  }
}

TEST_CASE("grid properties hold over random geometries") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int b = 2 + static_cast<int>(rng() % 7);
    const int h = b + static_cast<int>(rng() % 30);
    const int w = b + static_cast<int>(rng() % 30);
    const int s = 1 + static_cast<int>(rng() % b);
    const PatchGrid g = make_grid(h, w, b, s);

    std::set<std::pair<int, int>> uniq(g.locations.begin(), g.locations.end());
    CHECK(uniq.size() == g.count());  // no duplicates
    CHECK(std::is_sorted(g.locations.begin(), g.locations.end()));

    std::vector<int> cover(static_cast<size_t>(h) * w, 0);
    for (auto [i, j] : g.locations) {
      REQUIRE(i + b <= h);
      REQUIRE(j + b <= w);
      for (int r = 0; r < b; ++r)
        for (int c = 0; c < b; ++c) ++cover[static_cast<size_t>(i + r) * w + j + c];
    }
    for (int v : cover) CHECK(v >= 1);
  }
}

TEST_CASE("extraction flattens column by column") {
  Image img(2, 2);
  img.at(0, 0) = 1;
  img.at(0, 1) = 2;
  img.at(1, 0) = 3;
  img.at(1, 1) = 4;
  const PatchGrid g = make_grid(2, 2, 2, 1);
  const PatchMatrix P = extract(img, g);
  REQUIRE(P.rows() == 4);
  REQUIRE(P.cols() == 1);
  CHECK(P(0, 0) == 1);
  CHECK(P(1, 0) == 3);
  CHECK(P(2, 0) == 2);
  CHECK(P(3, 0) == 4);
}

TEST_CASE("extraction is linear in the image") {
  const Image a = random_image(17, 13, 1);
  const Image b = random_image(17, 13, 2);
  Image sum(17, 13);
  for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] = 2.0 * a.data[i] - 0.5 * b.data[i];
  const PatchGrid g = make_grid(17, 13, 5, 3);
  const PatchMatrix diff =
      extract(sum, g) - (2.0 * extract(a, g) - 0.5 * extract(b, g));
  CHECK(diff.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("aggregation inverts extraction") {
  for (auto [h, w, b, s] : {std::tuple{16, 16, 8, 3}, {9, 9, 8, 7}, {23, 31, 4, 1},
                            {10, 22, 5, 5}}) {
    const Image img = random_image(h, w, static_cast<uint64_t>(h * 100 + w));
    const PatchGrid g = make_grid(h, w, b, s);
    const Image back = aggregate(extract(img, g), g);
    REQUIRE(back.same_size(img));
    for (size_t i = 0; i < img.data.size(); ++i)
      CHECK(std::abs(back.data[i] - img.data[i]) <= 1e-12);
  }
}

TEST_CASE("aggregation averages overlapping contributions") {
  // two patches covering the same pixels: the mean wins
  PatchGrid g;
  g.image_h = 2;
  g.image_w = 2;
  g.patch = 2;
  g.stride = 1;
  g.locations = {{0, 0}, {0, 0}};
  PatchMatrix P(4, 2);
  P.col(0).setZero();
  P.col(1).setConstant(10.0);
  const Image out = aggregate(P, g);
  for (double v : out.data) CHECK(v == doctest::Approx(5.0));
}

TEST_CASE("aggregation matches the scatter-style reference bit for bit") {
  for (auto [h, w, b, s] : {std::tuple{20, 20, 8, 3}, {33, 17, 5, 2}, {12, 40, 6, 6}}) {
    const PatchGrid g = make_grid(h, w, b, s);
    std::mt19937_64 rng(static_cast<uint64_t>(h + w));
    std::normal_distribution<double> dist(0.0, 50.0);
    PatchMatrix P(g.dim(), static_cast<Eigen::Index>(g.count()));
    for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = dist(rng);
    const Image fast = aggregate(P, g);
    const Image ref = ref::aggregate_naive(P, g);
    for (size_t i = 0; i < fast.data.size(); ++i) CHECK(fast.data[i] == ref.data[i]);
  }
}

TEST_CASE("skipped patches drop out of the average") {
  const PatchGrid g = make_grid(8, 8, 4, 4);  // four tiles
  PatchMatrix P(16, 4);
  P.setConstant(7.0);
  P.col(2).setConstant(100.0);  // will be skipped
  std::vector<uint8_t> accepted{1, 1, 0, 1};
  const Image out = aggregate(P, g, accepted);
  // tile 2 covers rows 4..7, cols 0..3, and nothing else covers it
  CHECK(out.at(5, 1) == 0.0);
  CHECK(out.at(1, 1) == doctest::Approx(7.0));
  CHECK(out.at(6, 6) == doctest::Approx(7.0));
}

TEST_CASE("geometry validation") {
  CHECK_THROWS(make_grid(4, 4, 8, 1));   // patch larger than image
  CHECK_THROWS(make_grid(8, 8, 8, 0));   // zero stride
  CHECK_THROWS(make_grid(16, 16, 4, 5)); // stride past the patch side
  const PatchGrid g = make_grid(8, 8, 4, 4);
  CHECK_THROWS(extract(random_image(9, 8, 1), g));  // image size mismatch
  PatchMatrix bad(16, 3);
  bad.setZero();
  CHECK_THROWS(aggregate(bad, g));  // wrong column count

  PatchGrid unsorted = g;
  std::swap(unsorted.locations[0], unsorted.locations[1]);
  PatchMatrix P(16, 4);
  P.setZero();
  CHECK_THROWS(aggregate(P, unsorted));
}
