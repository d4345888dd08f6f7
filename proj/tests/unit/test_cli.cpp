#include "svscl/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <random>
#include <sstream>

using namespace svscl;

namespace {

const std::string kFixtures = SVSCL_FIXTURE_DIR;

ExactScalar q(long long n, long long d) { return ExactScalar(Rational(n) / d); }

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli_main(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<nlohmann::json> records(const std::string& ndjson) {
  std::vector<nlohmann::json> v;
  std::istringstream in(ndjson);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) v.push_back(nlohmann::json::parse(line));
  }
  return v;
}

template <class E>
std::vector<ConfigDiagnostic> diagnostics_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const E& e) {
    return e.diagnostics();
  }
  FAIL("expected a config error");
  return {};
}

}  // namespace

TEST_CASE("burgers flux from the grammar") {
  const RunConfig c = parse_config("[flux]\nd=1\nA1 = \"1/2 u^2\"\n");
  CHECK(c.sim.flux == FluxPoly(1, {{0, 0, q(1, 2)}}));
  CHECK(c.sim.noise.size() == 0);
}

TEST_CASE("named constants are exact") {
  const RunConfig c = parse_config("[flux]\nd = 1\nb = sqrt(5)\nA1 = \"b u^2\"\n");
  const auto& b = c.constants.at("b");
  CHECK(b.terms().size() == 1);
  CHECK(b.terms().at(5) == 1);
  CHECK(c.sim.flux.coeff(0, 2) == ExactScalar::sqrt_of(5));
}

TEST_CASE("transcendental coefficients are rejected") {
  const auto d = diagnostics_of<ParseError>("[flux]\nd=1\nA1 = \"pi u^2\"\n");
  REQUIRE(d.size() == 1);
  CHECK(d[0].line == 3);
  CHECK(d[0].column == 7);
}

TEST_CASE("exact scalar literals") {
  CHECK(parse_exact_scalar("3/2") == q(3, 2));
  CHECK(parse_exact_scalar("1/2*sqrt(3)") == q(1, 2) * ExactScalar::sqrt_of(3));
  CHECK(parse_exact_scalar("3/2 + 1/2*sqrt(3)") == q(3, 2) + q(1, 2) * ExactScalar::sqrt_of(3));
  CHECK(parse_exact_scalar("sqrt(12)") == ExactScalar(2) * ExactScalar::sqrt_of(3));
  CHECK(parse_exact_scalar("0.125") == q(1, 8));
  CHECK(parse_exact_scalar("010") == ExactScalar(10));
  CHECK(parse_exact_scalar("-2.5e-1") == q(-1, 4));
  CHECK(parse_exact_scalar("(1 + sqrt(2))^2") == ExactScalar(3) + ExactScalar(2) * ExactScalar::sqrt_of(2));
  CHECK_THROWS_AS(parse_exact_scalar("1/0"), Error);
  CHECK_THROWS_AS(parse_exact_scalar("1/sqrt(2)"), Error);
  CHECK_THROWS_AS(parse_exact_scalar("u"), Error);
}

TEST_CASE("polynomials in u") {
  const auto p = parse_polynomial("1/3 u^3 + u");
  REQUIRE(p.size() >= 4);
  CHECK(p[1] == ExactScalar(1));
  CHECK(p[2].is_zero());
  CHECK(p[3] == q(1, 3));
  const auto sq = parse_polynomial("(u + 1)^2 - 1");
  CHECK(sq[0].is_zero());
  CHECK(sq[1] == ExactScalar(2));
  CHECK(sq[2] == ExactScalar(1));
  const auto implicit = parse_polynomial("sqrt(2) u^2 + u*u/2");
  CHECK(implicit[2] == ExactScalar::sqrt_of(2) + q(1, 2));
  CHECK_THROWS_AS(parse_polynomial("u^"), Error);
  CHECK_THROWS_AS(parse_polynomial("1/u"), Error);

  // formatting round trip
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> small(-5, 5), rad(1, 7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ExactScalar> c(4);
    for (auto& x : c) x = q(small(rng), 1 + std::abs(small(rng))) + ExactScalar(small(rng)) * ExactScalar::sqrt_of(rad(rng));
    const auto back = parse_polynomial(format_polynomial(c));
    for (std::size_t j = 0; j < c.size(); ++j) CHECK((j < back.size() ? back[j] : ExactScalar()) == c[j]);
  }
}

TEST_CASE("unknown keys are validation errors with line numbers") {
  const auto d = diagnostics_of<ValidationError>("[sim]\nnu = 0.1\n\nvelocity = 3\n");
  REQUIRE(d.size() == 1);
  CHECK(d[0].line == 4);
  CHECK(d[0].message.find("velocity") != std::string::npos);

  CHECK(diagnostics_of<ValidationError>("[colour]\nx = 1\n").at(0).line == 1);
  CHECK(diagnostics_of<ValidationError>("nu = 1\n").at(0).line == 1);
  CHECK(diagnostics_of<ValidationError>("[sim]\nnu = 1\nnu = 2\n").at(0).line == 3);
  CHECK(diagnostics_of<ValidationError>("[sim]\nnu = -1\n").size() == 1);
  CHECK(diagnostics_of<ValidationError>("[experiment]\nname = nothing\n").at(0).line == 2);
  CHECK(diagnostics_of<ValidationError>("[flux]\nd=1\n[noise]\nmodes = [(1), (-1)]\namplitudes = [1, 2]\n").size() == 1);
}

TEST_CASE("syntax errors carry line and column") {
  const auto d = diagnostics_of<ParseError>("[sim]\nnu 0.1\n[flux\n");
  REQUIRE(d.size() == 2);
  CHECK(d[0].line == 2);
  CHECK(d[1].line == 3);
  const auto n = diagnostics_of<ParseError>("[sim]\ndt = fast\n");
  REQUIRE(n.size() == 1);
  CHECK(n[0].line == 2);
  CHECK(n[0].column == 6);
}

TEST_CASE("noise sections") {
  const RunConfig pattern = parse_config("[flux]\nd = 2\nA1 = \"u^2\"\nA2 = \"u^2\"\n[noise]\npattern = axis\namplitude = 0.5\n");
  CHECK(pattern.sim.noise.size() == 8);
  CHECK(pattern.sim.noise.amplitude({2, 0}) == 0.5);
  const RunConfig listed = parse_config("[flux]\nd = 1\nA1 = \"u^2\"\n[noise]\nmodes = [(1), (3)]\namplitudes = [1, 0.25]\n");
  CHECK(listed.sim.noise.size() == 4);
  CHECK(listed.sim.noise.amplitude({-3}) == 0.25);
}

TEST_CASE("config round trip") {
  for (const auto& entry : std::vector<std::string>{"square_flux_2d", "irrational_slopes_2d", "cubic_1d",
                                                    "x_flux_y_noise", "burgers_simulate", "l1_contraction",
                                                    "uniqueness_probe", "density_proxy", "residual_decay"}) {
    CAPTURE(entry);
    std::ifstream in(kFixtures + "/" + entry + ".cfg");
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    const RunConfig c = parse_config(buf.str());
    const std::string text = emit_config(c);
    const RunConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(emit_config(back) == text);
    CHECK(config_hash(back) == config_hash(c));
  }

  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> small(-4, 4), rad(1, 11), dim_d(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    RunConfig c;
    const int dim = dim_d(rng);
    std::vector<std::vector<ExactScalar>> rows(dim);
    for (auto& r : rows) {
      r.resize(1 + 1 + trial % 3);
      for (auto& x : r) x = q(small(rng), 1 + std::abs(small(rng))) * ExactScalar::sqrt_of(rad(rng));
      r.back() = r.back() + ExactScalar(1);
    }
    c.sim.flux = FluxPoly(dim, rows);
    c.sim.noise = axis_pattern_noise(dim, 0.1 + unit(rng));
    c.sim.nu = 0.01 + unit(rng);
    c.sim.cutoff = 2 + trial % 3;
    c.sim.dt = 1e-3 * (1 + unit(rng));
    c.sim.t_end = c.sim.dt * static_cast<double>(100 + trial);
    c.sim.seed = rng();
    c.sim.stream_id = rng() >> 8;
    c.sim.scheme = trial % 2 ? Scheme::SemiImplicitEuler : Scheme::ExpEuler;
    c.sim.initial = SpectralField(dim, c.sim.cutoff);
    c.sim.initial.set(axis_vector(dim, 0), unit(rng) - 0.5);
    c.radius = 3 + trial % 5;
    c.experiment = experiment_names()[trial % experiment_names().size()];
    if (trial % 3 == 0) c.ensemble_size = 10 + trial;
    if (trial % 4 == 0) c.burn_in = unit(rng);
    c.params["spacing"] = std::to_string(trial);
    c.observables = {Observable::l2(), Observable::mode(axis_vector(dim, 0)), Observable::sobolev(1.5)};
    c.output_path = "out" + std::to_string(trial) + ".ndjson";
    c.tangent_xi = axis_vector(dim, dim - 1);
    c.tangent_epsilons = {unit(rng), 1e-7};
    CAPTURE(trial);
    const RunConfig back = parse_config(emit_config(c));
    CHECK(back == c);
  }
}

TEST_CASE("config overlays experiment defaults") {
  const RunConfig c = parse_config("[experiment]\nname = ou_law\nensemble = 7\nspacing = 3\n");
  const ExperimentSpec spec = experiment_spec(c, "ou_law", false);
  CHECK(spec.ensemble_size == 7);
  CHECK(spec.params.at("spacing") == "3");
  CHECK(spec.config.nu == default_spec("ou_law").config.nu);
}

TEST_CASE("dispatch") {
  SUBCASE("unknown subcommand") {
    const Run r = cli({"frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown subcommand 'frobnicate'") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);
  }
  SUBCASE("no subcommand") { CHECK(cli({}).code == 2); }
  SUBCASE("missing config file") {
    const Run r = cli({"--config", kFixtures + "/does_not_exist.cfg", "check"});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
  SUBCASE("check holds") {
    const Run r = cli({"--config", kFixtures + "/square_flux_2d.cfg", "check"});
    CHECK(r.code == 0);
    const auto recs = records(r.out);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0]["type"] == "condition");
    CHECK(recs[0]["verdict"].get<std::string>().rfind("HOLDS_", 0) == 0);
    CHECK(recs[1]["type"] == "nondegeneracy");
    CHECK(recs[1]["algebraic"] == false);
    CHECK(r.err.find("verdict: HOLDS_") != std::string::npos);
  }
  SUBCASE("check violated") {
    const Run r = cli({"--config", kFixtures + "/x_flux_y_noise.cfg", "check"});
    CHECK(r.code == 1);
    const auto recs = records(r.out);
    CHECK(recs[0]["verdict"] == "VIOLATED");
    CHECK(recs[0]["witness"] == nlohmann::json::array({1, 0}));
  }
  SUBCASE("degree-1 violation uses the fast path") {
    std::ofstream("linear_flux.cfg") << "[flux]\nd = 1\nA1 = \"2 u\"\n[noise]\nmodes = [(1)]\namplitude = 1\n";
    const Run r = cli({"--config", "linear_flux.cfg", "check"});
    CHECK(r.code == 0);
    CHECK(r.err.find("degree-1 fast path") != std::string::npos);
  }
  SUBCASE("radius override") {
    const Run r = cli({"--config", kFixtures + "/cubic_1d.cfg", "--radius", "5", "check"});
    CHECK(records(r.out)[0]["explored_radius"] == 5);
  }
  SUBCASE("simulate is reproducible and seed-sensitive") {
    const std::vector<std::string> args = {"--config", kFixtures + "/burgers_simulate.cfg", "simulate"};
    const Run a = cli(args), b = cli(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    const auto recs = records(a.out);
    CHECK(recs.front()["type"] == "header");
    CHECK(recs.front()["seed"] == 17);
    CHECK(recs.back()["type"] == "summary");
    CHECK(recs[recs.size() - 2]["step"] == 1000);
    CHECK(recs.size() == 1 + 101 + 1);
    auto seeded = args;
    seeded.insert(seeded.begin(), {"--seed", "18"});
    CHECK(cli(seeded).out != a.out);
  }
  SUBCASE("tangent") {
    const Run r = cli({"--config", kFixtures + "/burgers_simulate.cfg", "tangent"});
    CHECK(r.code == 0);
    CHECK(records(r.out).back()["first_order"] == true);
  }
  SUBCASE("malliavin") {
    const Run r = cli({"--config", kFixtures + "/burgers_simulate.cfg", "malliavin"});
    CHECK(r.code == 0);
    const auto recs = records(r.out);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0]["type"] == "gram");
    CHECK(recs[0]["matrix"].size() == 64);
    CHECK(recs[0]["eigenvalues"][0].get<double>() > 0.0);
    CHECK(recs[1]["window"][0] == 0.5);
  }
  SUBCASE("experiment and report") {
    const Run r = cli({"--config", kFixtures + "/l1_contraction.cfg", "--out", "l1.ndjson", "experiment"});
    CHECK(r.code == 0);
    CHECK(r.out.find("experiment l1_contraction: PASS") != std::string::npos);
    const Run rep = cli({"report", "l1.ndjson"});
    CHECK(rep.code == 0);
    CHECK(rep.out.find("l1_contraction,PASS,violations,0") != std::string::npos);
    std::remove("l1.ndjson");
  }
  SUBCASE("failing experiment exits 1") {
    std::ofstream("irr_small.cfg") << "[experiment]\nname = irreducibility\nensemble = 8\n";
    const Run r = cli({"--config", "irr_small.cfg", "experiment"});
    CHECK(r.code == 1);
    CHECK(records(r.out).at(0)["verdict"] == "FAIL");
  }
}
