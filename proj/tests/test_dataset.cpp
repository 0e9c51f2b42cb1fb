#include <doctest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"
#include "imago/dataset.hpp"
#include "imago/errors.hpp"

using namespace imago;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_traces(in, "mem");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

SynthSpec small_spec() {
  SynthSpec s;
  s.shape = {6, 5};
  s.levels = 3;
  s.per_cluster_count = 7;
  s.signature_pixels = 2;
  s.noise_flip_prob = 0.1;
  s.label_jitter = 0.8;
  s.seed = 99;
  return s;
}

}  // namespace

TEST_CASE("load_traces parses the JSONL schema") {
  const auto ds = parse("{\"n_features\":2,\"horizon\":2}\n{\"id\":\"a\",\"xi\":0.5,\"events\":[[1,1]]}\n");
  REQUIRE(ds.size() == 1);
  CHECK(ds.shape == ImageShape{2, 2});
  CHECK(ds.traces[0].id() == "a");
  CHECK(ds.traces[0].xi() == 0.5);
  CHECK(ds.traces[0].events().size() == 1);
}

TEST_CASE("load_traces errors name the line and the field") {
  const std::string header = "{\"n_features\":2,\"horizon\":2}\n";
  CHECK(error_of(header + "{\"id\":\"a\",\"xi\":1.2,\"events\":[]}\n").find("mem:2: label out of range") !=
        std::string::npos);
  CHECK(error_of(header + "{\"id\":\"a\",\"xi\":0.2,\"events\":[[3,1]]}\n")
            .find("mem:2: feature index out of range") != std::string::npos);
  CHECK(error_of(header + "{\"id\":\"a\",\"xi\":0.2,\"events\":[[1,0]]}\n").find("time index out of range") !=
        std::string::npos);
  CHECK(error_of(header + "\n{\"id\":\"a\",\"events\":[]}\n").find("mem:3: field 'xi'") != std::string::npos);
  CHECK(error_of(header + "{\"id\":\"a\",\"xi\":0.1,\"events\":[]}\n{\"id\":\"a\",\"xi\":0.1,\"events\":[]}\n")
            .find("duplicate id") != std::string::npos);
  CHECK(error_of(header + "{not json\n").find("mem:2: malformed JSON") != std::string::npos);
  CHECK(error_of("").find("missing header") != std::string::npos);

  std::istringstream in(header);
  CHECK_THROWS_WITH_AS(read_traces(in, "mem", ImageShape{3, 2}), doctest::Contains("dims mismatch"),
                       ValidationError);
}

TEST_CASE("save then load is the identity") {
  auto ds = generate_synthetic(small_spec());
  ds.traces.push_back(testing::trace("edge", 1.0, {}));
  ds.traces.push_back(testing::trace("tiny", 1e-300, {{6, 5}}));
  std::ostringstream out;
  write_traces(ds, out);
  std::istringstream in(out.str());
  const auto back = read_traces(in, "mem");
  CHECK(same_content(ds, back));
}

TEST_CASE("split sizes, partition and determinism") {
  SynthSpec spec = small_spec();
  spec.levels = 2;
  spec.per_cluster_count = 5;
  const auto ds = generate_synthetic(spec);
  REQUIRE(ds.size() == 10);

  const auto a = split(ds, {0.2, 7});
  CHECK(a.test.size() == 2);
  CHECK(a.train.size() == 8);

  std::set<std::string> ids;
  for (const auto& t : a.train.traces) ids.insert(t.id());
  for (const auto& t : a.test.traces) CHECK(ids.insert(t.id()).second);
  CHECK(ids.size() == ds.size());

  const auto b = split(ds, {0.2, 7});
  CHECK(same_content(a.train, b.train));
  CHECK(same_content(a.test, b.test));

  const auto c = split(ds, {0.2, 8});
  CHECK((!same_content(a.test, c.test) || !same_content(a.train, c.train)));
}

TEST_CASE("split rejects bad input") {
  Dataset one{{2, 2}, {testing::trace("a", 0.1, {})}, FileSource{}};
  CHECK_THROWS_AS(split(one, {0.2, 1}), ValidationError);
  one.traces.push_back(testing::trace("b", 0.2, {}));
  CHECK_THROWS_AS(split(one, {0.0, 1}), ValidationError);
  CHECK_THROWS_AS(split(one, {1.0, 1}), ValidationError);
  CHECK(split(one, {0.2, 1}).test.size() == 1);
}

TEST_CASE("test_count at 100K scale") {
  CHECK(test_count(10, 0.2) == 2);
  CHECK(test_count(107856, 0.2) == 21572);
  CHECK(107856 - test_count(107856, 0.2) == 86284);
}

TEST_CASE("stratified split takes the fraction from every cluster") {
  SynthSpec spec = small_spec();
  spec.per_cluster_count = 10;
  const auto ds = generate_synthetic(spec);
  const auto parts = split(ds, {0.3, 5, true, spec.levels});
  std::vector<int> per_cluster(3, 0);
  for (const auto& t : parts.test.traces) ++per_cluster[static_cast<std::size_t>(assign_cluster(t.label(), 3) - 1)];
  CHECK(per_cluster == std::vector<int>{3, 3, 3});
}

TEST_CASE("generator with zero noise emits exactly the signature") {
  SynthSpec spec;
  spec.shape = {4, 4};
  spec.levels = 2;
  spec.per_cluster_count = 5;
  spec.signature_pixels = 3;
  spec.seed = 3;
  const auto sigs = signature_pixels(spec);
  const auto ds = generate_synthetic(spec);
  REQUIRE(ds.size() == 10);
  for (const auto& t : ds.traces) {
    const int c = assign_cluster(t.label(), 2);
    const auto& sig = sigs[static_cast<std::size_t>(c - 1)];
    CHECK(std::vector<FeatureEvent>(t.events().begin(), t.events().end()) == sig);
    CHECK(t.xi() == doctest::Approx((c - 0.5) / 2.0));
  }
  std::set<FeatureEvent> all(sigs[0].begin(), sigs[0].end());
  for (const auto& e : sigs[1]) CHECK(all.insert(e).second);
}

TEST_CASE("generator is byte-deterministic and labels stay in their band") {
  SynthSpec spec = small_spec();
  spec.label_jitter = 1.0;
  std::ostringstream a, b;
  write_traces(generate_synthetic(spec), a);
  write_traces(generate_synthetic(spec), b);
  CHECK(a.str() == b.str());

  const auto ds = generate_synthetic(spec);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int generating = static_cast<int>(i) / spec.per_cluster_count + 1;
    CHECK(assign_cluster(ds.traces[i].label(), spec.levels) == generating);
  }
}

TEST_CASE("generator rejects signatures that cannot be disjoint") {
  SynthSpec spec;
  spec.shape = {2, 2};
  spec.levels = 3;
  spec.signature_pixels = 2;
  CHECK_THROWS_AS(generate_synthetic(spec), ValidationError);
  spec.signature_pixels = 1;
  CHECK_NOTHROW(generate_synthetic(spec));
}

TEST_CASE("synth spec JSON round trip") {
  const auto s = small_spec();
  const auto back = synth_spec_from_json(synth_spec_to_json(s));
  CHECK(back.shape == s.shape);
  CHECK(back.levels == s.levels);
  CHECK(back.per_cluster_count == s.per_cluster_count);
  CHECK(back.signature_pixels == s.signature_pixels);
  CHECK(back.noise_flip_prob == s.noise_flip_prob);
  CHECK(back.label_jitter == s.label_jitter);
  CHECK(back.seed == s.seed);
  CHECK_THROWS_AS(synth_spec_from_json("{\"n_features\":2}"), ValidationError);
}
