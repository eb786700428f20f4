#include <doctest.h>

#include "samba/gradcheck.hpp"
#include "samba/ops.hpp"

using namespace samba;

TEST_CASE("check catches a wrong derivative") {
  Tensor x = Tensor::parameter({3}, {0.3, -0.7, 1.1});
  auto good = [&] { return sum(unary_map(x, [](double v) { return v * v * v; }, [](double v) { return 3 * v * v; })); };
  auto bad = [&] { return sum(unary_map(x, [](double v) { return v * v * v; }, [](double v) { return 2 * v * v; })); };
  const auto ok = gradcheck::check("good", good, x);
  CHECK(ok.pass);
  CHECK(ok.elements == 3);
  CHECK(ok.max_rel_error < 1e-8);
  const auto wrong = gradcheck::check("bad", bad, x);
  CHECK_FALSE(wrong.pass);
  CHECK(wrong.max_rel_error > 0.3);
}

TEST_CASE("report bookkeeping") {
  gradcheck::Report r;
  r.merge({"a", 1e-9, 4, true});
  r.merge({"a", 1e-6, 4, true});
  r.merge({"b", 0.5, 2, false});
  REQUIRE(r.groups.size() == 2);
  CHECK(r.groups[0].max_rel_error == 1e-6);
  CHECK_FALSE(r.ok());
  CHECK(r.failures() == std::vector<std::string>{"b"});
  CHECK(r.csv().rfind("group,elements,max_rel_error,pass\n", 0) == 0);
}

TEST_CASE("op and ssm families pass; the corrupted fixture fails") {
  gradcheck::Options opts;
  opts.seeds = {0};
  opts.only = {"ops", "ssm"};
  const auto report = gradcheck::run_all(opts);
  CHECK(report.groups.size() > 10);
  for (const auto& g : report.groups) {
    CAPTURE(g.group);
    CHECK(g.pass);
  }
  gradcheck::Options fixture;
  fixture.seeds = {0};
  fixture.only = {"fixture"};
  fixture.corrupt_fixture = true;
  const auto bad = gradcheck::run_all(fixture);
  CHECK_FALSE(bad.ok());
}
