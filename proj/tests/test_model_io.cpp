#include <gtest/gtest.h>

#include "nicholson/model_io.hpp"

using namespace nicholson;

namespace {

SystemSpec from_text(const char* text) { return build_spec(KeyValues::parse(text)); }

}  // namespace

TEST(ModelFile, DefaultsGiveReferenceModel) {
  const SystemSpec spec = from_text("# nothing but a comment\n");
  ASSERT_NE(spec.paper_family(), nullptr);
  EXPECT_EQ(spec.dim(), 2);
  EXPECT_EQ(spec.delays(), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(spec.paper_family()->params, (ParamSet{1.0, 1.0, 1.0}));
  EXPECT_EQ(spec.paper_family()->p, Shape::Sin);
  EXPECT_EQ(spec.paper_family()->q, Shape::Cos);
}

TEST(ModelFile, DecimalLiteralsAreExact) {
  const SystemSpec spec = from_text("mu = 0.85\nalpha12 = 0.1\nalpha21=1.2   # trailing comment\n");
  EXPECT_EQ(spec.paper_family()->params.mu, 0.85);
  EXPECT_EQ(spec.paper_family()->params.alpha12, 0.1);
  EXPECT_EQ(spec.paper_family()->params.alpha21, 1.2);
}

TEST(ModelFile, ConstantFamily) {
  const SystemSpec spec = from_text(
      "family = constant\nm = 2\ndelays = 1; 3\nd = 2, 2\nbeta = 0.5, 4\nc = 1, 2\na = 0, 0.25, 0.5, 0\n"
      "nonlinearity = rational:2\n");
  const auto* cf = std::get_if<ConstantFamily>(&spec.family());
  ASSERT_NE(cf, nullptr);
  EXPECT_EQ(cf->values.a(0, 1), 0.25);
  EXPECT_EQ(cf->values.a(1, 0), 0.5);
  EXPECT_EQ(cf->values.beta[1], 4.0);
  EXPECT_EQ(spec.delays()[1], 3.0);
  EXPECT_EQ(spec.nonlinearity(), Nonlinearity::rational(2.0));
}

TEST(ModelFile, RoundTrip) {
  const char* texts[] = {
      "mu = 0.7\nalpha12 = 0.01\nalpha21 = 1\np = zero\nbeta_scale = 10, 1\n",
      "family = constant\nm = 1\ndelays = 2.5\nd = 1\nbeta = 0.1\nc = 3\n",
  };
  for (const char* t : texts) {
    const SystemSpec a = from_text(t);
    const std::string once = write_model(a);
    const SystemSpec b = build_spec(KeyValues::parse(once));
    EXPECT_EQ(write_model(b), once);
  }
}

TEST(ModelFile, Errors) {
  EXPECT_THROW(from_text("mu = one\n"), ParseError);
  EXPECT_THROW(from_text("bogus = 1\n"), ParseError);
  EXPECT_THROW(from_text("mu = 1\nmu = 2\n"), ParseError);
  EXPECT_THROW(from_text("just text\n"), ParseError);
  EXPECT_THROW(from_text("m = 3\n"), ParseError);
  EXPECT_THROW(from_text("nonlinearity = rational:0.5\n"), ParseError);
  EXPECT_THROW(from_text("nonlinearity = logistic\n"), ParseError);
  EXPECT_THROW(from_text("p = tan\n"), ParseError);
  EXPECT_THROW(from_text("family = constant\nm = 1\ndelays = 1\nd = 1\nbeta = 1\n"), ParseError);
  EXPECT_THROW(from_text("family = constant\nm = 1\ndelays = 1\nd = 1\nbeta = 1\nc = 1\nmu = 2\n"), ParseError);
  EXPECT_THROW(from_text("delays = 1, 0\n"), ParseError);
  EXPECT_THROW(from_text("mu = -1\n"), ParseError);
}

TEST(ModelFile, ErrorsCarryLineNumbers) {
  try {
    from_text("mu = 1\n\nalpha12 = x\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(ModelFile, ConfigOverride) {
  KeyValues kv = KeyValues::parse("mu = 1\nalpha12 = 1\n");
  kv.merge(KeyValues::parse("mu = 3\n"));
  const SystemSpec spec = build_spec(kv);
  EXPECT_EQ(spec.paper_family()->params.mu, 3.0);
  EXPECT_EQ(spec.paper_family()->params.alpha12, 1.0);
}

TEST(ModelFile, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0}) EXPECT_EQ(parse_double(format_double(v)), v);
}
