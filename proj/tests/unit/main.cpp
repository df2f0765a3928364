#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "v2g/log.hpp"

int main(int argc, char** argv) {
  v2g::log::set_level(v2g::log::Level::Error);
  doctest::Context context(argc, argv);
  return context.run();
}
