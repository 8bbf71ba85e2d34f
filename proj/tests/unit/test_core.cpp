#include <doctest.h>

#include <random>
#include <sstream>

#include "lsedit/core.hpp"
#include "lsedit/errors.hpp"
#include "lsedit/table_io.hpp"
#include "support.hpp"

using namespace lsedit;

namespace {

std::vector<AttributeMeta> two_attrs() {
  return {{"au1", AttributeKind::continuous, AttributeRole::au},
          {"gender", AttributeKind::binary, AttributeRole::demographic}};
}

}  // namespace

TEST_CASE("table rejects out-of-range labels") {
  Matrix codes = Matrix::Zero(2, 3);
  Matrix labels(2, 2);
  labels << 0.5, 1, 0.2, 0;
  CHECK_NOTHROW(AttributeTable(codes, labels, two_attrs()));
  labels(1, 0) = 1.5;
  CHECK_THROWS_AS(AttributeTable(codes, labels, two_attrs()), ValidationError);
  labels(1, 0) = 0.5;
  labels(0, 1) = 0.5;
  CHECK_THROWS_AS(AttributeTable(codes, labels, two_attrs()), ValidationError);
}

TEST_CASE("table rejects duplicate names and non-finite codes") {
  auto attrs = two_attrs();
  attrs[1].name = "au1";
  CHECK_THROWS_AS(AttributeTable(Matrix::Zero(1, 2), Matrix::Zero(1, 2), attrs), ValidationError);
  Matrix codes = Matrix::Zero(1, 2);
  codes(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(AttributeTable(codes, Matrix::Zero(1, 2), two_attrs()), ValidationError);
}

TEST_CASE("unknown attribute lookup names the attribute") {
  AttributeTable t(Matrix::Zero(1, 2), Matrix::Zero(1, 2), two_attrs());
  try {
    t.index_of("au9");
    FAIL("expected a throw");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("au9") != std::string::npos);
  }
}

TEST_CASE("builder, select and concat") {
  AttributeTable::Builder b(2, two_attrs());
  Vector l(2);
  l << 0.25, 1;
  b.add(Vector::Constant(2, 1.0), l, StochasticTag{1, 2, 3});
  l << 0.75, 0;
  b.add(Vector::Constant(2, 2.0), l);
  const auto t = b.build();
  CHECK(t.rows() == 2);
  CHECK(t.tags()[0] == StochasticTag{1, 2, 3});
  CHECK_FALSE(t.tags()[1].has_value());

  const std::vector<std::size_t> rows{1};
  const auto one = t.select_rows(rows);
  CHECK(one.codes()(0, 0) == 2.0);
  const std::vector<std::string> names{"gender"};
  const auto g = t.select_attributes(names);
  CHECK(g.attribute_count() == 1);
  CHECK(g.labels()(0, 0) == 1.0);

  const std::vector<AttributeTable> parts{t, one};
  const auto joined = concat(parts);
  CHECK(joined.rows() == 3);
  CHECK(joined.codes()(2, 1) == 2.0);
  CHECK(t.names_with_role(AttributeRole::au) == std::vector<std::string>{"au1"});
}

TEST_CASE("table text format round-trips exactly") {
  const Matrix codes = testing::gaussian(5, 4, 3);
  Matrix labels(5, 2);
  labels << 0.1, 1, 0.0, 0, 1.0 / 3.0, 1, 0.999, 0, 0.5, 1;
  std::vector<std::optional<StochasticTag>> tags(5);
  tags[2] = StochasticTag{0, 255, 17, 4};
  const AttributeTable t(codes, labels, two_attrs(), tags);
  std::stringstream ss;
  write_attribute_table(ss, t);
  const auto back = read_attribute_table(ss);
  CHECK(back == t);
}

TEST_CASE("malformed table text is a validation error") {
  std::istringstream missing_data("dimension=2\nattr a continuous AU\n");
  CHECK_THROWS_AS(read_attribute_table(missing_data), ValidationError);
  std::istringstream short_row("dimension=2\nattr a continuous AU\ndata\n1 2\n");
  CHECK_THROWS_AS(read_attribute_table(short_row), ValidationError);
  std::istringstream bad_number("dimension=2\nattr a continuous AU\ndata\n1 x 0.5\n");
  CHECK_THROWS_AS(read_attribute_table(bad_number), ValidationError);
}

TEST_CASE("format_real is round-trip exact") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567, 0.0}) {
    CHECK(parse_real(format_real(v), "v") == v);
  }
  CHECK_THROWS_AS(parse_real("1.0abc", "v"), ValidationError);
}

TEST_CASE("base64 matches RFC 4648 vectors") {
  auto enc = [](std::string s) {
    return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foob") == "Zm9vYg==");
  CHECK(enc("fooba") == "Zm9vYmE=");
  CHECK(enc("foobar") == "Zm9vYmFy");
  const auto bytes = base64_decode("Zm9vYmE=");
  CHECK(std::string(bytes.begin(), bytes.end()) == "fooba");
  CHECK_THROWS_AS(base64_decode("Zm9v!"), ValidationError);
}

TEST_CASE("provenance format round-trips") {
  const std::vector<ProvenanceStep> steps{
      {ProvenanceStep::Kind::base, {}},
      {ProvenanceStep::Kind::conditioned, {"au2", "au3"}},
      {ProvenanceStep::Kind::projected, {"gender"}}};
  const auto text = format_provenance(steps);
  CHECK(text == "base;conditioned(au2,au3);projected(gender)");
  CHECK(parse_provenance(text) == steps);
  CHECK_THROWS_AS(parse_provenance("rotated(x)"), ValidationError);
}

TEST_CASE("direction normalizes and flags zero vectors") {
  Vector raw(2);
  raw << 3, 4;
  const auto d = Direction::from_raw("a", raw, 0.5, {});
  CHECK(d.unit().norm() == doctest::Approx(1.0));
  CHECK(d.calibration() == doctest::Approx(5.0));
  CHECK_FALSE(d.degenerate());
  const auto z = Direction::from_raw("b", Vector::Zero(2), 0.0, {});
  CHECK(z.degenerate());
}

TEST_CASE("bank rejects mismatched dimension and round-trips") {
  DirectionBank bank(2);
  Vector raw(2);
  raw << 1, 1;
  bank.put(Direction::from_raw("a", raw, 0.1, {{ProvenanceStep::Kind::base, {}}}));
  CHECK_THROWS_AS(bank.put(Direction::from_raw("c", Vector::Ones(3), 0, {})), ValidationError);
  std::stringstream ss;
  write_direction_bank(ss, bank);
  CHECK(read_direction_bank(ss) == bank);
  std::stringstream again;
  write_direction_bank(again, bank);
  CHECK_THROWS_AS(read_direction_bank(again, 3), ValidationError);
}

TEST_CASE("empty stochastic tags are rejected") {
  std::vector<std::optional<StochasticTag>> tags{StochasticTag{}};
  CHECK_THROWS_AS(AttributeTable(Matrix::Zero(1, 2), Matrix::Zero(1, 2), two_attrs(), tags), ValidationError);
}

TEST_CASE("random tables and banks round-trip through text") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + trial % 7);
    const auto d = static_cast<Eigen::Index>(1 + trial % 5);
    Matrix labels(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      labels(i, 0) = u(rng);
      labels(i, 1) = u(rng) < 0.5 ? 0.0 : 1.0;
    }
    std::vector<std::optional<StochasticTag>> tags(static_cast<std::size_t>(n));
    for (auto& t : tags) {
      if (u(rng) < 0.5) t = StochasticTag(1 + static_cast<std::size_t>(u(rng) * 12), static_cast<std::uint8_t>(trial));
    }
    const AttributeTable table(testing::gaussian(n, d, trial) * 1e3, labels, two_attrs(), tags);
    std::stringstream ts;
    write_attribute_table(ts, table);
    CHECK(read_attribute_table(ts) == table);

    DirectionBank bank(static_cast<std::size_t>(d));
    for (int k = 0; k < 3; ++k) {
      bank.put(Direction::from_raw("d" + std::to_string(k), testing::gaussian(d, 1, trial * 10 + k).col(0), u(rng),
                                   {{ProvenanceStep::Kind::conditioned, {"x", "y"}}}));
    }
    std::stringstream bs;
    write_direction_bank(bs, bank);
    CHECK(read_direction_bank(bs) == bank);
  }
}
