#include "doctest.h"

#include <sstream>

#include "bdlat/io.hpp"

using namespace bdlat;

TEST_CASE("shortest round-trip formatting") {
  for (double x : {0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5})
    CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("event log round trip") {
  auto model = bpdl_rates({1.0, 1.0, Kernel::box(2, 0.1, 1), Kernel::box(2, 0.1, 1)});
  auto w = Window::ball(2, 2);
  auto tr = run(model, Configuration::delta(w, Site{0, 0}), 2.0, 42, 1);
  REQUIRE_FALSE(tr.events.empty());
  std::stringstream ss;
  write_event_log(ss, tr, "abcd1234");
  auto log = read_event_log(ss);
  CHECK(log.config_hash == "abcd1234");
  CHECK(log.seed == 42);
  CHECK(log.model == tr.model_tag);
  REQUIRE(log.events.size() == tr.events.size());
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    CHECK(log.events[i].t == tr.events[i].time);
    CHECK(log.events[i].x == tr.site(tr.events[i]));
    CHECK(log.events[i].delta == tr.events[i].delta);
    CHECK(log.events[i].channel == tr.events[i].channel);
  }
}

TEST_CASE("event line format") {
  auto w = Window::ball(1, 1);
  Trajectory tr{Configuration(w), Configuration(w), {{0.5, 2, 1, Channel::Birth}, {0.75, 2, -1, Channel::Death}},
                1.0, 3, 0, "test", Algorithm::Gillespie};
  std::stringstream ss;
  write_event_log(ss, tr, "h");
  std::string header, first, second;
  std::getline(ss, header);
  std::getline(ss, first);
  std::getline(ss, second);
  CHECK(first == R"({"t":0.5,"x":[1],"d":1,"ch":"b"})");
  CHECK(second == R"({"t":0.75,"x":[1],"d":-1,"ch":"d"})");
}

TEST_CASE("csv tables") {
  CsvTable t({"a", "b"});
  t.meta("seed", std::uint64_t{7}).meta("x", 0.5);
  t.add_row({"1", "2"});
  CHECK(t.str() == "# seed=7\n# x=0.5\na,b\n1,2\n");
  CHECK_THROWS(t.add_row({"1"}));

  SurvivalEstimate e{0.5, 10.0, 5, 100, 3, 0.03, {0.01, 0.08}};
  auto s = survival_table({e}).str();
  CHECK(s.find("lambda,T,radius,replicates,p_hat,ci_lo,ci_hi\n0.5,10,5,100,0.03,0.01,0.08\n") != std::string::npos);
}
