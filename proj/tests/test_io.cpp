#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "doctest.h"
#include "mpt/error.hpp"
#include "mpt/io.hpp"
#include "oracles.hpp"

using namespace mpt;
namespace fs = std::filesystem;

namespace {

ModalModel sample_model(std::mt19937_64& rng, const std::string& label = "probe") {
  return ModalModel(0.012, 3.5e7, 4.0, oracle::random_psd(rng, 1e-6),
                    {{2.5, oracle::random_psd(rng)}, {60.0, oracle::random_psd(rng)}}, label);
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidInput;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("doubles survive the text format bit for bit") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 20000) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    CHECK(same_bits(io::parse_double(io::format_double(v), "v"), v));
    ++checked;
  }
  for (double v : {0.0, -0.0, 1.0, -1e-300, 5e-324, 1.7976931348623157e308, 0.1})
    CHECK(same_bits(io::parse_double(io::format_double(v), "v"), v));
  CHECK(io::parse_double(" 2.5 ", "v") == 2.5);
  CHECK(io::parse_double("+3e2", "v") == 300.0);
  CHECK_THROWS_AS(io::parse_double("", "v"), Error);
  CHECK_THROWS_AS(io::parse_double("1.0x", "v"), Error);
  CHECK(message_of([] { io::parse_double("abc", "line 4 Rt_c11"); }).find("line 4 Rt_c11") != std::string::npos);
}

TEST_CASE("signature CSV round trip") {
  std::mt19937_64 rng(2);
  auto sig = synthesize(sample_model(rng), log_spaced(1e1, 1e7, 17));
  sig.omega_limit = 3.2e7;
  const std::string text = io::format_signature(sig);
  const auto back = io::parse_signature(text);
  CHECK(same_bits(back.alpha, sig.alpha));
  CHECK(same_bits(back.sigma_star, sig.sigma_star));
  CHECK(same_bits(back.mu_r, sig.mu_r));
  CHECK(back.label == "probe");
  REQUIRE(back.omega_limit.has_value());
  CHECK(*back.omega_limit == *sig.omega_limit);
  REQUIRE(back.samples.size() == sig.samples.size());
  for (std::size_t m = 0; m < sig.samples.size(); ++m) {
    CHECK(back.samples[m].omega == sig.samples[m].omega);
    CHECK(back.samples[m].r_tilde == sig.samples[m].r_tilde);
    CHECK(back.samples[m].i_part == sig.samples[m].i_part);
  }
  CHECK(io::format_signature(back) == text);

  sig.omega_limit.reset();
  CHECK_FALSE(io::parse_signature(io::format_signature(sig)).omega_limit.has_value());
}

TEST_CASE("signature CSV errors") {
  std::mt19937_64 rng(3);
  const auto sig = synthesize(sample_model(rng), log_spaced(1e2, 1e4, 3));
  const std::string good = io::format_signature(sig);
  auto replace = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  CHECK_NOTHROW(io::parse_signature(good));
  CHECK(message_of([&] { io::parse_signature(replace("Rt_c12", "Rt_c21")); }).find("header") != std::string::npos);
  CHECK(message_of([&] { io::parse_signature(replace("# mu_r", "# mu")); }).find("'mu'") != std::string::npos);
  CHECK(message_of([&] { io::parse_signature(replace("# alpha_m=", "# alpha=")); }).find("alpha") != std::string::npos);
  const auto first_row = good.find("\n1.0000000000000000e+02") + 1;
  std::string bad = good;
  bad.insert(bad.find(',', first_row) + 1, "x");
  CHECK(message_of([&] { io::parse_signature(bad); }).find("Rt_c11") != std::string::npos);
  std::string short_row = good;
  short_row.replace(short_row.find(',', first_row), 1, ";");
  CHECK(message_of([&] { io::parse_signature(short_row); }).find("13 columns") != std::string::npos);

  MptSignature swapped = sig;
  std::swap(swapped.samples[0], swapped.samples[1]);
  CHECK(message_of([&] { io::parse_signature(io::format_signature(swapped)); }).find("increase") !=
        std::string::npos);
  MptSignature multi = sig;
  multi.label = "two\nlines";
  CHECK_THROWS_AS(io::format_signature(multi), Error);
}

TEST_CASE("model JSON round trip and errors") {
  std::mt19937_64 rng(4);
  const auto model = sample_model(rng, "coin");
  const auto back = io::parse_model(io::format_model(model, 1e6));
  CHECK(back.model.label() == "coin");
  CHECK(back.model.alpha() == model.alpha());
  CHECK(back.model.sigma_star() == model.sigma_star());
  CHECK(back.model.mu_r() == model.mu_r());
  CHECK(back.model.n0() == model.n0());
  REQUIRE(back.model.modes().size() == 2);
  for (int n = 0; n < 2; ++n) {
    CHECK(back.model.modes()[n].lambda == model.modes()[n].lambda);
    CHECK(back.model.modes()[n].weight == model.modes()[n].weight);
  }
  CHECK(back.omega_limit == 1e6);

  const std::string base =
      R"({"alpha_m":0.01,"sigma_star_S_per_m":1e6,"mu_r":2,"n0_m3":[1e-6,1e-6,1e-6,0,0,0],)";
  CHECK_NOTHROW(io::parse_model(base + R"("modes":[{"lambda":1,"weights":[1,1,1,0,0,0]}]})"));
  CHECK(message_of([&] { io::parse_model(base + R"("modes":[{"lambda":1,"weights":[1,1,1,0,0]}]})"); })
            .find("model.modes[0].weights") != std::string::npos);
  CHECK(message_of([&] { io::parse_model(base + R"("modes":[{"weights":[1,1,1,0,0,0]}]})"); })
            .find("'lambda'") != std::string::npos);
  CHECK(message_of([] { io::parse_model(R"({"modes":[]})"); }).find("alpha_m") != std::string::npos);
  CHECK(message_of([&] { io::parse_model(base + R"("modes":[{"lambda":"x","weights":[1,1,1,0,0,0]}]})"); })
            .find("lambda") != std::string::npos);
  CHECK(code_of([&] { io::parse_model(base + R"("modes":[{"lambda":-1,"weights":[1,1,1,0,0,0]}]})"); }) ==
        ErrorCode::kInvalidInput);
  CHECK(code_of([] { io::parse_model("{not json"); }) == ErrorCode::kInvalidInput);
}

TEST_CASE("layout JSON") {
  const auto layout = io::parse_layout(R"({
    "object_position_m": [0, 0, 0],
    "exciters": [{"h0_A_per_m": [1, 0, 0]}, {"h0_A_per_m": [0, 2, 0]}],
    "receivers": [{"center_m": [0.3, 0, 0], "normal": [1, 0, 0], "radius_m": 0.05, "quadrature_order": 12},
                  {"center_m": [0, 0.3, 0], "normal": [0, 1, 0]}]})");
  REQUIRE(layout.exciters.size() == 2);
  CHECK(layout.exciters[1] == Vec3(0, 2, 0));
  REQUIRE(layout.receivers.size() == 2);
  CHECK(layout.receivers[0].radius == 0.05);
  CHECK(layout.receivers[0].quadrature_order == 12);
  CHECK(layout.receivers[1].radius == ReceiverCoil{}.radius);
  CHECK(layout.receivers[1].quadrature_order == 8);

  CHECK(message_of([] { io::parse_layout(R"({"exciters": [], "receivers": []})"); }).find("object_position_m") !=
        std::string::npos);
  CHECK(message_of([] {
          io::parse_layout(R"({"object_position_m": [0,0,0], "exciters": [{"h0_A_per_m": [1,0]}], "receivers": []})");
        }).find("layout.exciters[0].h0_A_per_m") != std::string::npos);
  CHECK(code_of([] {
          io::parse_layout(R"({"object_position_m": [0,0,0], "exciters": [{"h0_A_per_m": [1,0,0]}],
                               "receivers": [{"center_m": [0,0,0], "normal": [0,0,1]}]})");
        }) == ErrorCode::kInvalidInput);
}

TEST_CASE("dataset CSV round trip") {
  std::mt19937_64 rng(5);
  const std::vector<ClassifiedModel> objects{{sample_model(rng), 0}, {sample_model(rng), 1}};
  DatasetOptions opt;
  opt.noise_level = 0.02;
  opt.replicates = 3;
  opt.seed = 11;
  const auto data = build_dataset(objects, {"nut", "bolt"}, log_spaced(1e2, 1e6, 4), opt);
  const std::string csv = io::format_dataset(data);
  const std::string side = io::format_dataset_sidecar(data, R"({"seed": 11})");
  const auto back = io::parse_dataset(csv, side);
  CHECK(back.layout() == data.layout());
  CHECK(back.class_names() == data.class_names());
  REQUIRE(back.size() == data.size());
  for (std::size_t p = 0; p < data.size(); ++p) {
    CHECK(back.x(p).values == data.x(p).values);
    CHECK(back.label(p) == data.label(p));
  }
  CHECK(side.find("\"seed\": 11") != std::string::npos);
  CHECK(csv.substr(0, csv.find(',')) == "eig_Rt_l1_m0");
  CHECK(csv.find(",t_nut,t_bolt\n") != std::string::npos);

  std::string other_side = side;
  other_side.replace(other_side.find("\"eig\""), 5, "\"principal\"");
  CHECK(code_of([&] { io::parse_dataset(csv, other_side); }) == ErrorCode::kIncompatibleFeatures);
  std::string two_hot = csv;
  const auto row_end = two_hot.find('\n', two_hot.find('\n') + 1);
  two_hot.replace(row_end - 3, 3, "1,1");
  CHECK(message_of([&] { io::parse_dataset(two_hot, side); }).find("exactly one") != std::string::npos);
}

TEST_CASE("atomic file writes") {
  const fs::path dir = fs::temp_directory_path() / ("mpt_io_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  const fs::path p = dir / "out.txt";
  io::write_file_atomic(p, "first\n");
  io::write_file_atomic(p, "second\n");
  CHECK(io::read_file(p) == "second\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  CHECK_THROWS_AS(io::write_file_atomic(dir / "missing" / "x.txt", "y"), Error);
  CHECK_THROWS_AS(io::read_file(dir / "absent.txt"), Error);
  fs::remove_all(dir);
}
