#include "doctest.h"

TEST_SUITE_BEGIN("models");
TEST_SUITE_END();
