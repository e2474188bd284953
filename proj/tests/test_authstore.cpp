#include <gtest/gtest.h>

#include "normpuf/authstore.hpp"
#include "normpuf/pipeline.hpp"
#include "oracles.hpp"

using namespace normpuf;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::format_error;
}

NormMap map_of(std::uint64_t seed) { return true_norm_map(generate_patch(seed)).float_rounded(); }

}  // namespace

TEST(Store, EnrollGetBitExact) {
  TemplateStore s;
  const auto m = map_of(1);
  s.enroll("a", m);
  EXPECT_EQ(s.get("a"), m);
  EXPECT_EQ(code_of([&] { s.enroll("a", m); }), Errc::duplicate_id);
  EXPECT_EQ(code_of([&] { (void)s.get("zz"); }), Errc::unknown_id);
}

TEST(Store, VerifyItselfAndOthers) {
  TemplateStore s;
  EXPECT_EQ(code_of([&] { (void)s.verify(map_of(1)); }), Errc::empty_store);
  s.enroll("a", map_of(1));
  s.enroll("b", map_of(2));
  const auto self = s.verify(s.get("a"), "a");
  EXPECT_TRUE(self.accepted);
  EXPECT_DOUBLE_EQ(self.score.corr_x, 1.0);
  EXPECT_DOUBLE_EQ(self.score.corr_y, 1.0);
  const auto other = s.verify(map_of(3));
  EXPECT_FALSE(other.accepted);
  EXPECT_LT(std::abs(other.score.corr_x), 0.05);
  EXPECT_LT(std::abs(other.score.corr_y), 0.05);
  const auto found = s.verify(s.get("b"));
  EXPECT_EQ(found.matched_id, "b");
  EXPECT_EQ(code_of([&] { (void)s.verify(map_of(1), "nope"); }), Errc::unknown_id);
}

TEST(Store, RecaptureAccepted) {
  TemplateStore s;
  const auto p = generate_patch(50);
  s.enroll("p", acquire(p, Protocol::scanner(983), 1));
  const auto out = s.verify(acquire(p, Protocol::mobile(4, 983), 2), "p");
  EXPECT_TRUE(out.accepted);
  EXPECT_GT(out.score.min(), 0.9);
}

TEST(Store, TwelveScansOfFourSheets) {
  TemplateStore s;
  for (int sheet = 0; sheet < 4; ++sheet) {
    const auto p = generate_patch(100 + sheet);
    for (int scan = 0; scan < 3; ++scan)
      s.enroll("sheet" + std::to_string(sheet) + "_" + std::to_string(scan),
               acquire(p, Protocol::scanner(983), derive_seed(sheet, {static_cast<std::uint64_t>(scan)})));
  }
  EXPECT_EQ(s.size(), 12u);
}

TEST(Store, QueryLogInCallOrder) {
  TemplateStore s;
  EXPECT_TRUE(s.query_log().empty());
  s.enroll("a", map_of(1));
  s.enroll("b", map_of(2));
  const char* ids[] = {"a", "b", "a", "b", "a"};
  for (auto id : ids) (void)s.verify(map_of(1), id);
  const auto log = s.query_log();
  ASSERT_EQ(log.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(log[i].id, ids[i]);
    if (i) EXPECT_GT(log[i].timestamp, log[i - 1].timestamp);
  }
  EXPECT_TRUE(log[0].accepted);
  EXPECT_FALSE(log[1].accepted);
}

TEST(Store, VerifyNeverMutatesRecords) {
  TemplateStore s;
  s.enroll("a", map_of(1));
  const auto fp = s.fingerprint();
  for (int i = 0; i < 3; ++i) (void)s.verify(map_of(4 + i), "a");
  EXPECT_EQ(s.fingerprint(), fp);
  s.enroll("b", map_of(2));
  EXPECT_NE(s.fingerprint(), fp);
}

TEST(Store, SnapshotHasOwnLog) {
  TemplateStore s;
  s.enroll("a", map_of(1));
  (void)s.verify(map_of(1), "a");
  auto snap = s.snapshot();
  EXPECT_EQ(snap->query_count(), 0u);
  (void)snap->verify(map_of(1), "a");
  EXPECT_EQ(s.query_count(), 1u);
  EXPECT_EQ(snap->fingerprint(), s.fingerprint());
}

TEST(Store, PersistsAcrossReopen) {
  const auto dir = oracle::temp_dir("store");
  {
    auto s = TemplateStore::open(dir / "db", StoreConfig{0.4});
    s->enroll("a", map_of(1), SourceTag::mobile);
    s->enroll("b", map_of(2));
  }
  auto s = TemplateStore::open(dir / "db");
  EXPECT_DOUBLE_EQ(s->threshold(), 0.4);
  EXPECT_EQ(s->size(), 2u);
  EXPECT_EQ(s->get("a"), map_of(1));
  EXPECT_EQ(s->record("a").source, SourceTag::mobile);
  EXPECT_LT(s->record("a").enrolled_at, s->record("b").enrolled_at);
  EXPECT_EQ(code_of([&] { s->enroll("a", map_of(3)); }), Errc::duplicate_id);
  std::filesystem::remove_all(dir);
}

TEST(Store, ThresholdValidated) { EXPECT_THROW(TemplateStore(StoreConfig{1.5}), Error); }

TEST(Store, DimensionMismatchOnVerify) {
  TemplateStore s;
  s.enroll("a", map_of(1));
  EXPECT_EQ(code_of([&] { (void)s.verify(NormMap::zeros(10, 10), "a"); }), Errc::dimension_mismatch);
}
