#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "oshot/common/errors.h"
#include "oshot/common/rng.h"
#include "oshot/synthgen/augment.h"
#include "oshot/synthgen/dataset_io.h"
#include "oshot/synthgen/domain.h"
#include "oshot/synthgen/image.h"
#include "oshot/synthgen/scene.h"

using namespace oshot;
using namespace oshot::synth;
namespace fs = std::filesystem;

namespace {

Image ramp(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>((x * 7 + y * 13 + c) % 255) / 255.0f;
  return img;
}

Box mask_bbox(const Image& img) {
  int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.at(x, y, 0) > 0.5f) {
        x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
      }
  return {double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

Image box_mask(const Box& b, int w, int h) {
  Image img(w, h);
  for (int y = int(b.y1); y < int(b.y2); ++y)
    for (int x = int(b.x1); x < int(b.x2); ++x) img.at(x, y, 0) = 1.0f;
  return img;
}

}  // namespace

TEST(Rotate, IdentityAndInverse) {
  const auto img = ramp(100, 50);
  EXPECT_EQ(rotate(img, 0), img);
  for (int q = 0; q < 4; ++q) EXPECT_EQ(rotate(rotate(img, q), (4 - q) % 4), img);
  EXPECT_THROW(rotate(img, 4), std::invalid_argument);
}

TEST(Rotate, OneHotPixelLandsCounterClockwise) {
  Image img(100, 50);
  img.at(2, 5, 0) = 1.0f;
  const auto r = rotate(img, 1);
  ASSERT_EQ(r.width(), 50);
  ASSERT_EQ(r.height(), 100);
  EXPECT_EQ(r.at(5, 97, 0), 1.0f);
  EXPECT_EQ(mask_bbox(r), (Box{5, 97, 6, 98}));
}

TEST(RotateBox, SpecExamples) {
  const Box b{10, 20, 30, 40};
  EXPECT_EQ(rotate_box(b, 0, 100, 50), b);
  EXPECT_EQ(rotate_box(b, 1, 100, 50), (Box{20, 70, 40, 90}));
  EXPECT_EQ(rotate_box(b, 2, 100, 50), (Box{70, 10, 90, 30}));
}

TEST(RotateBox, MatchesMaskOracle) {
  auto rng = make_rng(11, "test");
  for (int i = 0; i < 60; ++i) {
    const int w = uniform_int(rng, 8, 40), h = uniform_int(rng, 8, 40);
    const int x1 = uniform_int(rng, 0, w - 1), y1 = uniform_int(rng, 0, h - 1);
    const Box b{double(x1), double(y1), double(uniform_int(rng, x1 + 1, w)), double(uniform_int(rng, y1 + 1, h))};
    for (int q = 0; q < 4; ++q) {
      EXPECT_EQ(rotate_box(b, q, w, h), mask_bbox(rotate(box_mask(b, w, h), q))) << b << " q=" << q;
    }
  }
}

TEST(RotateBox, RejectsInvalidBox) {
  EXPECT_THROW(rotate_box({5, 5, 5, 10}, 1, 20, 20), std::invalid_argument);
  EXPECT_THROW(rotate_box({0, 0, 30, 10}, 1, 20, 20), std::invalid_argument);
}

TEST(Scene, DeterministicAndSingleObject) {
  SceneSpec spec;
  spec.min_objects = spec.max_objects = 1;
  const auto a = generate_scene(spec, 0);
  EXPECT_EQ(a.labels.size(), 1u);
  const auto b = generate_scene(spec, 0);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(generate_scene(spec, 1).image, a.image);
}

TEST(Scene, LabelsAreValidTightBoxes) {
  SceneSpec spec;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto img = generate_scene(spec, s);
    ASSERT_GE(img.labels.size(), 1u);
    ASSERT_LE(img.labels.size(), 4u);
    for (const auto& l : img.labels) {
      EXPECT_TRUE(l.box.valid_in(spec.image_size, spec.image_size));
      EXPECT_GE(l.class_id, 0);
      EXPECT_LT(l.class_id, spec.num_classes());
      EXPECT_GE(l.box.width(), 4.0);
    }
  }
}

TEST(Scene, ClassFrequenciesNearUniform) {
  SceneSpec spec;
  std::map<int, int> counts;
  int total = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    for (const auto& l : generate_scene(spec, s).labels) ++counts[l.class_id], ++total;
  }
  const double expected = double(total) / spec.num_classes();
  for (int c = 0; c < spec.num_classes(); ++c) {
    EXPECT_NEAR(counts[c], expected, 0.2 * expected) << "class " << c;
  }
}

TEST(Scene, ValidateRejectsBadSpecs) {
  SceneSpec spec;
  spec.image_size = 100;
  EXPECT_THROW(spec.validate(8), std::invalid_argument);
  spec = {};
  spec.min_objects = 0;
  EXPECT_THROW(spec.validate(8), std::invalid_argument);
}

TEST(Domain, EmptyChainIsIdentity) {
  const auto img = generate_scene({}, 3);
  const auto out = apply_domain_shift(img, DomainSpec::parse("source", ""));
  EXPECT_EQ(out.image, img.image);
  EXPECT_EQ(out.labels, img.labels);
}

TEST(Domain, FullFogMovesEveryPixel) {
  const auto img = generate_scene({}, 3);
  const auto out = apply_domain_shift(img, DomainSpec::parse("fog", "fog:density=1.0"));
  double diff = 0.0;
  for (std::size_t i = 0; i < img.image.pixels().size(); ++i) diff += std::abs(out.image.pixels()[i] - img.image.pixels()[i]);
  EXPECT_GT(diff / img.image.pixels().size(), 0.0);
  EXPECT_EQ(out.labels, img.labels);
}

TEST(Domain, PaletteKeepsLabels) {
  const auto img = generate_scene({}, 4);
  const auto out = apply_domain_shift(img, DomainSpec::parse("p", "palette:strength=0.8"));
  EXPECT_EQ(out.labels, img.labels);
  EXPECT_NE(out.image, img.image);
}

TEST(Domain, ParseRoundTripAndErrors) {
  const auto d = DomainSpec::parse("x", "fog:density=0.5;noise:sigma=0.03");
  ASSERT_EQ(d.transform_chain.size(), 2u);
  EXPECT_DOUBLE_EQ(d.transform_chain[0].param("density", 0), 0.5);
  EXPECT_EQ(DomainSpec::parse("x", d.chain_string()).chain_string(), d.chain_string());
  EXPECT_THROW(DomainSpec::parse("x", "blur:radius=2"), ConfigError);
  EXPECT_THROW(DomainSpec::parse("x", "fog:density"), ConfigError);
}

TEST(Domain, TargetCountRange) {
  EXPECT_EQ(default_target_domains(1).size(), 1u);
  EXPECT_EQ(default_target_domains(8).size(), 8u);
  EXPECT_THROW(default_target_domains(0), ConfigError);
  EXPECT_THROW(default_target_domains(9), ConfigError);
}

TEST(Augment, IdentityGrayscaleAndDeterminism) {
  const auto img = generate_scene({}, 5);
  EXPECT_EQ(augment(img, AugmentKind::kIdentity, 123).image, img.image);
  const auto g = augment(img, AugmentKind::kGrayscale, 1).image;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      EXPECT_EQ(g.at(x, y, 0), g.at(x, y, 1));
      EXPECT_EQ(g.at(x, y, 1), g.at(x, y, 2));
    }
  EXPECT_EQ(augment(img, AugmentKind::kColorJitter, 7).image, augment(img, AugmentKind::kColorJitter, 7).image);
  for (auto k : augment_catalogue()) {
    EXPECT_EQ(augment(img, k, 9).labels, img.labels);
    EXPECT_EQ(augment_from_string(to_string(k)), k);
  }
}

TEST(DatasetIo, PngAndDatasetRoundTrip) {
  const auto dir = fs::temp_directory_path() / "oshot-test-dataset";
  fs::remove_all(dir);
  auto images = generate_split({}, DomainSpec::parse("fog", "fog:density=0.4"), "t", 5, 9, 2);
  write_dataset(dir, images, "seed = 9\n");
  ReadAudit::clear();
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.size(), images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    EXPECT_EQ(back[i].image, images[i].image);
    EXPECT_EQ(back[i].labels, images[i].labels);
    EXPECT_EQ(back[i].id, "t-" + std::to_string(i));
  }
  EXPECT_EQ(ReadAudit::paths().size(), images.size() + 1);
  fs::remove_all(dir);
  EXPECT_THROW(read_dataset(dir), MissingInput);
}

TEST(DatasetIo, SplitIsThreadIndependent) {
  const auto a = generate_split({}, {}, "s", 6, 1, 1);
  const auto b = generate_split({}, {}, "s", 6, 1, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].image, b[i].image);
}
