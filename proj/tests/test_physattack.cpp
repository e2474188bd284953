#include <gtest/gtest.h>

#include "normpuf/physattack.hpp"
#include "normpuf/pipeline.hpp"

using namespace normpuf;

namespace {

const SurfacePatch& sheet() {
  static const auto p = generate_patch(1);
  return p;
}

const NormMap& enrolled() {
  static const auto m = acquire(sheet(), Protocol::scanner(983), 99);
  return m;
}

}  // namespace

TEST(Attack, ParseAndNames) {
  for (auto k : {AttackKind::scratch, AttackKind::patch, AttackKind::scribble, AttackKind::crumple_random,
                 AttackKind::crumple_fold})
    EXPECT_EQ(parse_attack_kind(to_string(k)), k);
  EXPECT_THROW((void)parse_attack_kind("burn"), Error);
}

TEST(Attack, InvalidStrength) {
  for (double s : {0.0, 1.0, -0.1, 1.5}) {
    try {
      (void)apply_attack(sheet(), {AttackKind::scratch, s, 0});
      FAIL() << s;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_strength);
    }
  }
  EXPECT_NO_THROW((void)apply_attack(sheet(), {AttackKind::crumple_fold, 0.0, 0}));
}

TEST(Attack, VanishingStrengthLeavesPatchUnchanged) {
  for (auto k : {AttackKind::scratch, AttackKind::patch, AttackKind::scribble}) {
    const auto r = apply_attack(sheet(), {k, 1e-9, 3});
    EXPECT_EQ(r.patch, sheet());
    EXPECT_EQ(r.achieved_coverage, 0.0);
  }
}

TEST(Attack, CoverageMatchesStrengthAndUntouchedPixelsIdentical) {
  for (auto k : {AttackKind::scratch, AttackKind::patch, AttackKind::scribble})
    for (double s : kAttackStrengths) {
      const auto r = apply_attack(sheet(), {k, s, 5});
      EXPECT_NEAR(r.achieved_coverage, s, 1e-4) << to_string(k) << ' ' << s;
      std::size_t masked = 0;
      for (std::size_t i = 0; i < sheet().size(); ++i) {
        if (r.mask[i]) {
          ++masked;
          continue;
        }
        ASSERT_EQ(r.patch.normals()[i], sheet().normals()[i]);
        ASSERT_EQ(r.patch.albedo()[i], sheet().albedo()[i]);
      }
      EXPECT_EQ(masked, static_cast<std::size_t>(std::llround(s * sheet().size())));
    }
}

TEST(Attack, MaterialModels) {
  const PhysAttackParams p;
  const auto scr = apply_attack(sheet(), {AttackKind::scribble, 0.25, 1});
  const auto stk = apply_attack(sheet(), {AttackKind::patch, 0.25, 1});
  for (std::size_t i = 0; i < sheet().size(); ++i) {
    if (scr.mask[i]) ASSERT_NEAR(scr.patch.albedo()[i], std::max(p.ink_albedo, SurfacePatch::kMinAlbedo), 1e-12);
    if (stk.mask[i]) ASSERT_EQ(stk.patch.albedo()[i], p.sticker_albedo);
  }
  // Patch output stays a valid surface.
  for (const auto& n : stk.patch.normals()) ASSERT_NEAR(n.norm(), 1.0, 1e-9);
}

TEST(Attack, Deterministic) {
  for (auto k : {AttackKind::scratch, AttackKind::crumple_random, AttackKind::crumple_fold}) {
    const auto a = apply_attack(sheet(), {k, 0.25, 7}), b = apply_attack(sheet(), {k, 0.25, 7});
    EXPECT_EQ(a.patch, b.patch);
    EXPECT_NE(apply_attack(sheet(), {k, 0.25, 8}).patch, a.patch);
  }
}

TEST(Attack, CrumpleTouchesMostOfTheSheet) {
  EXPECT_GT(apply_attack(sheet(), {AttackKind::crumple_random, 0, 1}).achieved_coverage, 0.9);
  const auto f = apply_attack(sheet(), {AttackKind::crumple_fold, 0, 1});
  EXPECT_GT(f.achieved_coverage, 0.5);
}

TEST(Sweep, BaselineRowAndShape) {
  SweepSetup su;
  su.seed = 3;
  const double st[] = {0.0, 0.25};
  const auto rows = degradation_sweep(sheet(), enrolled(), AttackKind::scratch, st, 3, su);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].strength, 0.0);
  EXPECT_GT(std::min(rows[0].mean_x, rows[0].mean_y), 0.9);
  EXPECT_EQ(rows[0].failures, 0u);
  EXPECT_LT(rows[1].mean_x, rows[0].mean_x);
  EXPECT_EQ(rows[1].scores.size(), 3u);
  EXPECT_NEAR(rows[1].mean_coverage, 0.25, 1e-4);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  SweepSetup a, b;
  a.seed = b.seed = 4;
  a.threads = 1;
  b.threads = 3;
  const double st[] = {0.1};
  const auto ra = degradation_sweep(sheet(), enrolled(), AttackKind::scribble, st, 3, a);
  const auto rb = degradation_sweep(sheet(), enrolled(), AttackKind::scribble, st, 3, b);
  EXPECT_EQ(ra[0].scores, rb[0].scores);
}

TEST(Sweep, CrumpleFailsAlignmentOrCollapses) {
  SweepSetup su;
  su.seed = 5;
  const double none[] = {0.0};
  const auto r = degradation_sweep(sheet(), enrolled(), AttackKind::crumple_random, none, 4, su);
  EXPECT_EQ(r[0].trials, 4u);
  for (const auto& s : r[0].scores) EXPECT_LT(s.corr_x, 0.1);
  if (r[0].failures == r[0].trials) EXPECT_TRUE(std::isnan(r[0].mean_x));
}

TEST(Sweep, RejectsNoTrials) {
  const double st[] = {0.1};
  EXPECT_THROW((void)degradation_sweep(sheet(), enrolled(), AttackKind::scratch, st, 0), Error);
}
