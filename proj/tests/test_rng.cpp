#include <gtest/gtest.h>

#include "dpcvm/rng.hpp"

TEST(Rng, SubstreamsAreReproducible) {
  auto a = dpcvm::Stream::substream(7, dpcvm::StreamTag::bootstrap, 3);
  auto b = dpcvm::Stream::substream(7, dpcvm::StreamTag::bootstrap, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}
