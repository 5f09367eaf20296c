#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "usdiff/image.hpp"

using namespace usdiff;

TEST_SUITE("image") {
  TEST_CASE("construction checks the data length") {
    CHECK_THROWS_AS(Image2D(2, 2, std::vector<float>(3)), std::invalid_argument);
    Image2D img(3, 2, ValueRange::eight_bit, 5.0f);
    CHECK(img.size() == 6);
    CHECK(img.at(2, 1) == 5.0f);
    CHECK(img.all_finite());
    img.at(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(img.all_finite());
  }

  TEST_CASE("range conversion is affine and invertible") {
    Image2D img(2, 1, std::vector<float>{0.0f, 1.0f}, ValueRange::unit_interval);
    const auto s = convert_range(img, ValueRange::signed_unit);
    CHECK(s.range() == ValueRange::signed_unit);
    CHECK(s.at(0, 0) == doctest::Approx(-1.0));
    CHECK(s.at(1, 0) == doctest::Approx(1.0));
    const auto b = convert_range(s, ValueRange::eight_bit);
    CHECK(b.at(1, 0) == doctest::Approx(255.0));
    const auto back = convert_range(b, ValueRange::unit_interval);
    CHECK(back.at(0, 0) == doctest::Approx(0.0));
  }

  TEST_CASE("clamp respects the nominal bounds") {
    Image2D img(3, 1, std::vector<float>{-3.0f, 0.5f, 2.0f}, ValueRange::signed_unit);
    const auto c = clamp_to_range(img);
    CHECK(c.at(0, 0) == -1.0f);
    CHECK(c.at(1, 0) == 0.5f);
    CHECK(c.at(2, 0) == 1.0f);
  }

  TEST_CASE("mirror index repeats the edge sample") {
    CHECK(mirror_index(-1, 4) == 0);
    CHECK(mirror_index(-2, 4) == 1);
    CHECK(mirror_index(4, 4) == 3);
    CHECK(mirror_index(5, 4) == 2);
    CHECK(mirror_index(3, 1) == 0);
  }

  TEST_CASE("symmetric padding and cropping") {
    Image2D img(2, 2, std::vector<float>{1, 2, 3, 4});
    const auto p = pad_symmetric(img, 1);
    CHECK(p.width() == 4);
    CHECK(p.at(0, 0) == 1.0f);
    CHECK(p.at(3, 3) == 4.0f);
    CHECK(p.at(0, 2) == 3.0f);
    const auto c = crop(p, 1, 1, 2, 2);
    CHECK(c.data() == img.data());
    CHECK_THROWS(crop(img, 1, 1, 2, 2));
  }

  TEST_CASE("shape mismatch is reported") {
    Image2D a(2, 2), b(2, 3);
    CHECK_THROWS_AS(require_same_shape(a, b, "test"), std::invalid_argument);
    CHECK_NOTHROW(require_same_shape(a, a, "test"));
  }
}
