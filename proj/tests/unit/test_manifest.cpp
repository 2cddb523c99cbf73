#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "expect_error.hpp"
#include "fixtures.hpp"
#include "otomech/manifest.hpp"

using namespace otomech;
using otomech::testing::error_code_of;
using otomech::testing::error_message_of;

namespace {

const std::string kHeader =
    "id,audio_path,diagnosis,location,timing,source_title,source_url,excerpt_start_s,search_terms\n";

std::shared_ptr<const RecordingEmbeddingSource> reference_source() {
  return std::make_shared<SliceEmbeddingSource>(reference_embedder(3, 32));
}

}  // namespace

TEST_CASE("parse a manifest row") {
  const auto rows = parse_manifest(kHeader +
                                   "b01,audio/b01.wav,failing battery,front,starting,Car won't start,"
                                   "https://example.com/v/1,12.5,car clicking no start\n");
  REQUIRE(rows.size() == 1);
  const auto& r = rows[0];
  CHECK(r.id == "b01");
  CHECK(r.audio_path == "audio/b01.wav");
  CHECK(r.diagnosis == "failing battery");
  CHECK(r.location == Location::Front);
  CHECK(r.timing == Timing::Starting);
  CHECK(r.source_title == "Car won't start");
  CHECK(r.source_url == "https://example.com/v/1");
  CHECK(r.excerpt_start_s == 12.5);
  CHECK(r.search_terms == "car clicking no start");
}

TEST_CASE("csv details") {
  SUBCASE("quoted fields, CRLF, BOM, blank lines") {
    const auto rows = parse_manifest("\xEF\xBB\xBF" + kHeader.substr(0, kHeader.size() - 1) + "\r\n" +
                                     "a,a.wav,\"belt, worn\",rear,idling,\"He said \"\"squeal\"\"\",u,0,\"x\ny\"\r\n"
                                     "\r\n"
                                     "b,b.wav,belt,wheels,turning,t,u,3,s");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].diagnosis == "belt, worn");
    CHECK(rows[0].source_title == "He said \"squeal\"");
    CHECK(rows[0].search_terms == "x\ny");
    CHECK(rows[1].location == Location::Wheels);
    CHECK(rows[1].timing == Timing::Turning);
  }
  SUBCASE("columns in another order plus extras") {
    const auto rows = parse_manifest(
        "notes,timing,location,diagnosis,audio_path,id,search_terms,excerpt_start_s,source_url,source_title\n"
        "whatever,braking,rear,rotor,r.wav,r1,s,1,u,t\n");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].id == "r1");
    CHECK(rows[0].timing == Timing::Braking);
    CHECK(rows[0].location == Location::Rear);
  }
  SUBCASE("header only") { CHECK(parse_manifest(kHeader).empty()); }
}

TEST_CASE("manifest errors") {
  SUBCASE("unknown location") {
    const auto text = kHeader + "a,a.wav,belt,engine,idling,t,u,0,s\n";
    CHECK(error_code_of([&] { parse_manifest(text); }) == ErrorCode::InvalidEnum);
    CHECK(error_message_of([&] { parse_manifest(text); }).find("line 2") != std::string::npos);
  }
  SUBCASE("not_sure is a query-only value") {
    CHECK(error_code_of([&] { parse_manifest(kHeader + "a,a.wav,belt,front,not_sure,t,u,0,s\n"); }) ==
          ErrorCode::InvalidEnum);
  }
  SUBCASE("wrong column count names the line") {
    const auto text = kHeader + "a,a.wav,belt,front,idling,t,u,0,s\nb,b.wav,belt,front\n";
    CHECK(error_code_of([&] { parse_manifest(text); }) == ErrorCode::MalformedRow);
    CHECK(error_message_of([&] { parse_manifest(text); }).find("line 3") != std::string::npos);
  }
  SUBCASE("missing header column") {
    CHECK(error_code_of([] { parse_manifest("id,audio_path,diagnosis\na,b,c\n"); }) == ErrorCode::MalformedRow);
  }
  SUBCASE("empty required field") {
    CHECK(error_code_of([&] { parse_manifest(kHeader + "a,a.wav,,front,idling,t,u,0,s\n"); }) ==
          ErrorCode::MalformedRow);
  }
  SUBCASE("bad excerpt start") {
    CHECK(error_code_of([&] { parse_manifest(kHeader + "a,a.wav,x,front,idling,t,u,soon,s\n"); }) ==
          ErrorCode::MalformedRow);
    CHECK(error_code_of([&] { parse_manifest(kHeader + "a,a.wav,x,front,idling,t,u,-1,s\n"); }) ==
          ErrorCode::MalformedRow);
  }
  SUBCASE("duplicate id") {
    const auto text = kHeader + "a,a.wav,x,front,idling,t,u,0,s\na,b.wav,y,rear,idling,t,u,0,s\n";
    CHECK(error_code_of([&] { parse_manifest(text); }) == ErrorCode::DuplicateId);
  }
  SUBCASE("unterminated quote") {
    CHECK(error_code_of([&] { parse_manifest(kHeader + "a,a.wav,\"x,front,idling,t,u,0,s\n"); }) ==
          ErrorCode::MalformedRow);
  }
  SUBCASE("missing file") {
    CHECK(error_code_of([] { read_manifest("/nonexistent/manifest.csv"); }) == ErrorCode::IoError);
  }
}

TEST_CASE("write then parse is the identity") {
  std::mt19937_64 rng(12);
  const std::string alphabet = "abc XYZ,\"'\n\r;-_/é0123456789";
  const auto random_text = [&](std::size_t max_len) {
    std::string s;
    const std::size_t n = 1 + rng() % max_len;
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
    return s;
  };
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ManifestRow> rows;
    const std::size_t n = rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      ManifestRow r;
      r.id = "id" + std::to_string(i) + random_text(4);
      r.audio_path = random_text(10);
      r.diagnosis = random_text(12);
      r.location = static_cast<Location>(rng() % 3);
      r.timing = static_cast<Timing>(rng() % 5);
      r.source_title = rng() % 3 ? random_text(20) : "";
      r.source_url = rng() % 2 ? "https://example.com/" + std::to_string(rng() % 1000) : "";
      r.excerpt_start_s = std::uniform_real_distribution<double>(0, 600)(rng);
      r.search_terms = random_text(15);
      rows.push_back(std::move(r));
    }
    const auto text = write_manifest(rows);
    CHECK(parse_manifest(text) == rows);
    CHECK(write_manifest(parse_manifest(text)) == text);
  }
}

TEST_CASE("build an index from a manifest") {
  otomech::testing::TempDir dir;
  auto recs = otomech::testing::mixed_recordings(3, 3, 1, 1.5);
  recs[1].rate = 44100;
  const auto ds = otomech::testing::write_dataset(dir.path(), recs);
  const auto source = reference_source();

  const auto idx = build_index(read_manifest(ds.manifest_path), ds.root, *source, {.threads = 2});
  CHECK(idx.size() == 3);
  CHECK(idx.calibration().pair_count == 3);
  CHECK(idx.embedder_id() == source->embedder_id());
  CHECK(idx.dimension() == 32);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& r = idx.records()[i];
    CHECK(r.id == ds.rows[i].id);
    CHECK(r.diagnosis == ds.rows[i].diagnosis);
    CHECK(r.search_terms == ds.rows[i].search_terms);
    CHECK(r.source_url == ds.rows[i].source_url);
    CHECK(std::filesystem::path(r.audio_path).is_absolute());
    CHECK(std::filesystem::exists(r.audio_path));
    ids.insert(r.id);
  }
  CHECK(ids.size() == 3);

  SUBCASE("embedding equals the recording-level mean") {
    const auto w = load_canonical_file(ds.root / ds.rows[1].audio_path);
    CHECK(idx.records()[1].embedding.values == embed_recording(w, *reference_embedder(3, 32)).values);
  }
  SUBCASE("rebuild is byte-identical regardless of thread count") {
    const auto again = build_index(ds.rows, ds.root, *source, {.threads = 1});
    CHECK(again.serialize() == idx.serialize());
  }
}

TEST_CASE("build reports every failing row") {
  otomech::testing::TempDir dir;
  auto recs = otomech::testing::mixed_recordings(4, 2, 2, 1.5);
  recs[2].seconds = 0.5;
  auto ds = otomech::testing::write_dataset(dir.path(), recs);
  ds.rows[3].audio_path = "audio/missing.wav";
  try {
    build_index(ds.rows, ds.root, *reference_source());
    FAIL("expected BuildError");
  } catch (const BuildError& e) {
    CHECK(e.code() == ErrorCode::BuildFailed);
    REQUIRE(e.failures().size() == 2);
    CHECK(e.failures()[0].row_id == "r002");
    CHECK(e.failures()[0].code == ErrorCode::TooShort);
    CHECK(e.failures()[1].row_id == "r003");
    CHECK(e.failures()[1].code == ErrorCode::IoError);
    CHECK(std::string(e.what()).find("r002") != std::string::npos);
  }
}

TEST_CASE("build from a sidecar") {
  otomech::testing::TempDir dir;
  const auto recs = otomech::testing::mixed_recordings(4, 2, 3, 1.0);
  const auto ds = otomech::testing::write_dataset(dir.path(), recs);
  auto sidecar = std::make_shared<SidecarEmbeddings>("external:precomputed", 3);
  for (std::size_t i = 0; i < recs.size(); ++i) sidecar->add(recs[i].id, {1.0 + i, 0.5, -0.25 * i});
  const SidecarEmbeddingSource source(sidecar);

  const auto idx = build_index(ds.rows, ds.root, source);
  CHECK(idx.embedder_id() == "external:precomputed");
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(idx.records()[i].embedding.values == sidecar->lookup(recs[i].id).values);

  auto partial = std::make_shared<SidecarEmbeddings>("external:precomputed", 3);
  partial->add(recs[0].id, {1, 0, 0});
  try {
    build_index(ds.rows, ds.root, SidecarEmbeddingSource(partial));
    FAIL("expected BuildError");
  } catch (const BuildError& e) {
    REQUIRE(e.failures().size() == 3);
    for (const auto& f : e.failures()) CHECK(f.code == ErrorCode::MissingEmbedding);
  }
}
