#include <gtest/gtest.h>

#include <sstream>

#include "daalder/machine_io.hpp"
#include "test_util.hpp"

using namespace daalder;

TEST(MachineIo, RoundTripsRandomMachines) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = testutil::random_machine(1 + seed % 11, 1 + seed % 4, 1 + seed % 3, seed);
    EXPECT_EQ(deserialize(serialize(m)), m);
  }
}

TEST(MachineIo, ReadsHandWrittenFile) {
  const std::string text =
      "moore-machine 1\n"
      "# parity\n"
      "states 2\ninputs 2\noutputs 2\ninitial 0\n"
      "output 0 0\noutput 1 1\n"
      "transition 0 0 0\ntransition 0 1 1\n"
      "transition 1 0 1\ntransition 1 1 0\n";
  EXPECT_EQ(deserialize(text), testutil::parity_machine());
}

TEST(MachineIo, TruncatedFileReportsLine) {
  std::string text = serialize(testutil::parity_machine());
  text.resize(text.rfind("transition"));
  try {
    deserialize(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    // Header lines (5), two outputs, three transitions: the missing line is 11.
    EXPECT_EQ(e.line(), 11u);
  }
}

TEST(MachineIo, RejectsBadInput) {
  EXPECT_THROW(deserialize("moore-machine 2\n"), ParseError);
  EXPECT_THROW(deserialize("not-a-machine 1\n"), ParseError);
  std::string text = serialize(testutil::parity_machine());
  text.replace(text.find("transition 0 1 1"), 16, "transition 0 1 7");
  EXPECT_THROW(deserialize(text), ParseError);
}

TEST(MachineIo, DotMentionsEveryState) {
  const std::string dot = to_dot(testutil::parity_machine());
  EXPECT_NE(dot.find("digraph"), std::string::npos);
  EXPECT_NE(dot.find("s1"), std::string::npos);
}
