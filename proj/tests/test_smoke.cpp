#include <doctest.h>

#include "fhtgibbs/cli/commands.hpp"

TEST_CASE("headers compile and defaults validate") {
  fhtgibbs::RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
}
