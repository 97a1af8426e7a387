// Copyright 2026 The advsr-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <set>

#include "advsr/config.hpp"
#include "advsr/error.hpp"
#include "advsr/rng.hpp"
#include "advsr/utf8.hpp"

using namespace advsr;

TEST_CASE("utf8 splitting") {
  const std::string s = "a\xE2\x96\x81\xC3\xA9z";
  const auto chars = utf8::split_chars(s);
  REQUIRE(chars.size() == 4);
  CHECK(chars[1] == "\xE2\x96\x81");
  CHECK(chars[2] == "\xC3\xA9");
  CHECK(utf8::char_count(s) == 4);
  CHECK(utf8::split_words("  ab \t c\n").size() == 2);
  CHECK(utf8::split_words("   ").empty());
  CHECK(utf8::join({"a", "b", "c"}, "-") == "a-b-c");
  // A stray continuation byte still advances.
  CHECK(utf8::char_count("\x80\x80") == 2);
}

TEST_CASE("rng is reproducible and streams differ") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng s1 = Rng::stream(5, 0), s2 = Rng::stream(5, 1);
  CHECK(s1.next() != s2.next());
}

TEST_CASE("rng distributions") {
  Rng r(42);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  std::set<std::uint64_t> seen;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const auto k = r.below(7);
    CHECK(k < 7);
    seen.insert(k);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(seen.size() == 7);
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("config parsing") {
  const auto c = Config::parse("# comment\n a.b = 1 \nx.list = 1, 2,3\nflag = yes\n\nname = hello world\n");
  CHECK(c.get_int("a.b", 0) == 1);
  CHECK(c.get_doubles("x.list", {}) == std::vector<double>{1, 2, 3});
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_string("name", "") == "hello world");
  CHECK(c.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(c.get_int("name", 0), Error);
  CHECK_THROWS_AS(c.require_known({"a.b"}), Error);
  CHECK_THROWS_AS(Config::parse("oops\n"), ParseError);
  CHECK(Config::parse(c.serialize()).values() == c.values());
}
