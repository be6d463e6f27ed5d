#include <gtest/gtest.h>

#include "unlearn/tensor.hpp"

using unlearn::ParamTable;
using unlearn::Tensor;

TEST(Tensor, ShapeAndRows) {
  Tensor<float> t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.row_size(), 3u);
  EXPECT_EQ(t.row(1)[0], 4.0f);
  EXPECT_EQ(unlearn::shape_to_string(t.shape()), "[2,3]");
}

TEST(Tensor, DataSizeMismatchThrows) {
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), unlearn::UsageError);
}

TEST(Tensor, CastRoundTrip) {
  Tensor<float> t({3}, std::vector<float>{0.5f, -1.25f, 3.0f});
  EXPECT_EQ(t.cast<double>().cast<float>(), t);
}

TEST(ParamTable, KeepsInsertionOrderAndRejectsDuplicates) {
  ParamTable<float> p;
  p.add("b", Tensor<float>({1}));
  p.add("a", Tensor<float>({2}));
  EXPECT_EQ(p.entry(0).name, "b");
  EXPECT_EQ(p.find("a"), 1u);
  EXPECT_EQ(p.total_elements(), 3u);
  EXPECT_THROW(p.add("a", Tensor<float>({1})), unlearn::UsageError);
  EXPECT_THROW(p.at("missing"), unlearn::UsageError);
}

TEST(ParamTable, Congruence) {
  ParamTable<float> p;
  p.add("w", Tensor<float>({2, 2}));
  auto q = ParamTable<double>::filled_like(p, 1.0);
  EXPECT_TRUE(p.congruent_with(q));
  ParamTable<float> r;
  r.add("w", Tensor<float>({4}));
  EXPECT_FALSE(p.congruent_with(r));
}
