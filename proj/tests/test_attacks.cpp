#include "doctest.h"

TEST_SUITE_BEGIN("attacks");
TEST_SUITE_END();
