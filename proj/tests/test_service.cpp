#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pmc/service.hpp"

using namespace pmc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("pmc_service_" + name);
  fs::remove_all(dir);
  return dir;
}

class Running {
 public:
  explicit Running(const fs::path& dir) : project_(std::make_unique<service::Project>(dir)) {
    service::install_routes(server_, *project_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~Running() {
    server_.stop();
    thread_.join();
  }

  service::Project& project() { return *project_; }

  httplib::Result post(const std::string& path, const json& body) {
    return client().Post(path, body.is_null() ? std::string() : body.dump(), "application/json");
  }
  httplib::Result post_raw(const std::string& path, const std::string& body) {
    return client().Post(path, body, "application/json");
  }
  httplib::Result get(const std::string& path) { return client().Get(path); }

  json wait_job(const std::string& id) {
    for (;;) {
      auto r = get("/jobs/" + id);
      const auto j = json::parse(r->body);
      if (j["status"] == "succeeded" || j["status"] == "failed") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

 private:
  httplib::Client client() {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(120, 0);
    return c;
  }

  std::unique_ptr<service::Project> project_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

json body_of(const httplib::Result& r) { return json::parse(r->body); }

PoseSequence sinusoid_sequence(const std::string& id, int frames, double period) {
  PoseSequence s;
  s.id = id;
  s.width = 640;
  s.height = 480;
  s.joint_names = {"root", "hand"};
  for (int t = 0; t < frames; ++t) {
    const double y = 100.0 + 20.0 * std::sin(2.0 * std::numbers::pi * t / period);
    s.append_frame({{50.0, 50.0}, {80.0, y}});
  }
  return s;
}

DatasetConfig tiny_config() {
  DatasetConfig c;
  c.num_concepts = 2;
  c.sequences_per_concept = 3;
  c.min_reps = 3;
  c.max_reps = 4;
  c.seed = 5;
  return c;
}

json tiny_train_request(const ConceptVocabulary& vocab) {
  return {{"epochs", 3}, {"hidden_dim", 8}, {"lambda", 80.0}, {"seed", 2}, {"vocabulary", vocab.labels}};
}

}  // namespace

TEST(Extrema, SmoothedSinusoidPeaksAtKnownFrames) {
  std::vector<double> v;
  for (int t = 0; t < 80; ++t) v.push_back(std::sin(2.0 * std::numbers::pi * (t - 5) / 20.0));
  std::vector<int> maxima, minima;
  for (const auto& e : service::local_extrema(v)) (e.is_max ? maxima : minima).push_back(e.frame);
  EXPECT_EQ(maxima, (std::vector<int>{10, 30, 50, 70}));
  EXPECT_EQ(minima, (std::vector<int>{20, 40, 60}));
  EXPECT_TRUE(service::local_extrema(std::vector<double>(20, 1.0)).empty());
  EXPECT_EQ(service::moving_average({1, 2, 3, 4, 5}), (std::vector<double>{2, 2.5, 3, 3.5, 4}));
}

TEST(Service, SequencesAndTrajectories) {
  const auto dir = fresh_dir("traj");
  Running srv(dir);
  const auto seq = sinusoid_sequence("wave", 60, 20.0);
  auto r = srv.post("/sequences", to_json(seq));
  ASSERT_EQ(r->status, 201) << r->body;
  EXPECT_EQ(srv.post("/sequences", to_json(seq))->status, 409);
  EXPECT_EQ(srv.post_raw("/sequences", "{not json")->status, 400);
  json bad = to_json(sinusoid_sequence("bad", 3, 20.0));
  bad["frames"][1][0][0] = nullptr;
  EXPECT_EQ(srv.post("/sequences", bad)->status, 400);
  EXPECT_TRUE(fs::exists(dir / "sequences" / "wave.json"));

  r = srv.get("/sequences/wave/trajectories?joint=1");
  ASSERT_EQ(r->status, 200) << r->body;
  const auto j = body_of(r);
  EXPECT_EQ(j["y"].size(), 60u);
  EXPECT_EQ(j["name"], "hand");
  std::vector<int> frames;
  for (const auto& e : j["extrema"]["y"]) frames.push_back(e["frame"].get<int>());
  EXPECT_EQ(frames, (std::vector<int>{5, 15, 25, 35, 45, 55}));
  EXPECT_EQ(j["extrema"]["y"][0]["kind"], "max");
  EXPECT_TRUE(j["extrema"]["x"].empty());

  EXPECT_EQ(srv.get("/sequences/wave/trajectories?joint=2")->status, 400);
  EXPECT_EQ(srv.get("/sequences/wave/trajectories?joint=x")->status, 400);
  EXPECT_EQ(srv.get("/sequences/wave/trajectories")->status, 400);
  EXPECT_EQ(srv.get("/sequences/nope/trajectories?joint=0")->status, 404);
  EXPECT_EQ(srv.get("/jobs/j99")->status, 404);
  EXPECT_EQ(srv.get("/no/such/route")->status, 404);
}

TEST(Service, ApiTrainingMatchesFileTraining) {
  const auto dir = fresh_dir("train");
  const auto ds = generate_dataset(tiny_config());
  write_dataset(ds, dir / "data");
  const auto req = tiny_train_request(ds.vocabulary);

  // File path: the same sequences in the project's (id-sorted) order.
  auto files = pipeline::load_split(load_manifest(dir / "data" / "manifest.json"), "train");
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const auto expected = service::run_training(files, service::train_request_from_json(req));

  Running srv(dir / "project");
  EXPECT_EQ(srv.post("/train", req)->status, 400);  // nothing annotated yet
  for (const auto* it : ds.split("train")) {
    ASSERT_EQ(srv.post("/sequences", read_json_file(dir / "data" / "poses" / (it->id + ".json")))->status, 201);
    const auto ann = read_json_file(dir / "data" / "annotations" / (it->id + ".json"));
    auto r = srv.post("/sequences/" + it->id + "/annotations", ann);
    ASSERT_EQ(r->status, 201) << r->body;
  }
  json wrong = read_json_file(dir / "data" / "annotations" / (ds.split("train")[0]->id + ".json"));
  EXPECT_EQ(srv.post("/sequences/" + ds.split("train")[1]->id + "/annotations", wrong)->status, 400);
  EXPECT_EQ(srv.post("/sequences/nope/annotations", wrong)->status, 404);

  EXPECT_EQ(srv.post("/describe/" + ds.split("train")[0]->id, json())->status, 409);  // no model yet
  auto r = srv.post("/train", req);
  ASSERT_EQ(r->status, 202) << r->body;
  const auto job = srv.wait_job(body_of(r)["id"]);
  ASSERT_EQ(job["status"], "succeeded") << job.dump();

  EXPECT_EQ(read_json_file(dir / "project" / "models" / "recognizer.json"), checkpoint_to_json(expected.model));
  const auto concepts = body_of(srv.get("/concepts"));
  ASSERT_EQ(concepts.size(), expected.extracted.models.size());
  for (const auto& c : concepts)
    EXPECT_EQ(c, to_json(expected.extracted.models.at(c["concept"].get<std::string>())));

  const auto& probe = ds.split("train")[0]->id;
  r = srv.post("/describe/" + probe, json());
  ASSERT_EQ(r->status, 200) << r->body;
  const auto d = description_from_json(body_of(r));
  EXPECT_EQ(d, describe(ds.split("train")[0]->poses, expected.model).description);
  EXPECT_TRUE(fs::exists(dir / "project" / "descriptions" / (probe + ".json")));
  EXPECT_EQ(srv.post("/describe/nope", json())->status, 404);

  // Sessions from a sequence, with and without an explicit Description.
  r = srv.post("/sessions", {{"sequence_id", probe}});
  ASSERT_EQ(r->status, 201) << r->body;
  EXPECT_LE(body_of(r)["max_junction_gap"].get<double>(), 1e-9);
  json given = to_json(d);
  r = srv.post("/sessions", {{"sequence_id", probe}, {"description", given}});
  ASSERT_EQ(r->status, 201) << r->body;
  EXPECT_EQ(srv.post("/sessions", {{"sequence_id", "nope"}})->status, 404);
  EXPECT_EQ(srv.post("/sessions", json::object())->status, 400);
}

TEST(Service, SessionEditsConcurrencyAndRestart) {
  const auto dir = fresh_dir("sessions");
  const auto ds = generate_dataset(tiny_config());
  const auto& labels = ds.vocabulary.labels;
  json view, frames;
  std::string sid;
  {
    Running srv(dir);
    // Concept models installed by a finished training job.
    for (const auto* it : ds.split("train")) {
      ASSERT_EQ(srv.post("/sequences", to_json(it->poses))->status, 201);
      ASSERT_EQ(srv.post("/sequences/" + it->id + "/annotations", annotations_to_json(it->id, it->truth.annotations))->status, 201);
    }
    auto r = srv.post("/train", tiny_train_request(ds.vocabulary));
    ASSERT_EQ(srv.wait_job(body_of(r)["id"])["status"], "succeeded");

    const json script = {{"entries", json::array({json::array({labels[0], 3}), json::array({labels[1], 2})})}, {"seed", 11}};
    r = srv.post("/sessions", {{"script", script}});
    ASSERT_EQ(r->status, 201) << r->body;
    view = body_of(r);
    sid = view["id"];
    EXPECT_EQ(view["version"], 1);
    EXPECT_EQ(view["segments"].size(), 5u);
    EXPECT_EQ(srv.post("/sessions", {{"script", {{"entries", json::array({json::array({"unknown", 1})})}, {"seed", 0}}}})->status, 400);

    // Two editors start from version 1; the second is rejected.
    json relabel = {{"kind", "relabel"}, {"target", 0}, {"concept", labels[1]}, {"version", 1}};
    json del = {{"kind", "delete"}, {"target", 4}, {"version", 1}};
    r = srv.post("/sessions/" + sid + "/edits", relabel);
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(body_of(r)["version"], 2);
    EXPECT_EQ(body_of(r)["segments"][0]["concept"], labels[1]);
    r = srv.post("/sessions/" + sid + "/edits", del);
    EXPECT_EQ(r->status, 409);
    EXPECT_EQ(body_of(r)["error"]["kind"], "Conflict");
    del["version"] = 2;
    r = srv.post("/sessions/" + sid + "/edits", del);
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(body_of(r)["segments"].size(), 4u);

    json insert = {{"kind", "insert"}, {"target", 1}, {"entry", json::array({labels[0], 2})}, {"version", 3}};
    r = srv.post("/sessions/" + sid + "/edits", insert);
    ASSERT_EQ(r->status, 200) << r->body;
    json param = {{"kind", "set_primitive_param"}, {"target", 0}, {"primitive", 0}, {"joint", 1},
                  {"coeff", 1},                     {"value", 3.5}, {"version", 4}};
    r = srv.post("/sessions/" + sid + "/edits", param);
    ASSERT_EQ(r->status, 200) << r->body;
    view = body_of(r);
    EXPECT_EQ(view["version"], 5);
    EXPECT_EQ(view["segments"].size(), 6u);
    EXPECT_LE(view["max_junction_gap"].get<double>(), 1e-9);

    param["version"] = 5;
    param["target"] = 99;
    EXPECT_EQ(srv.post("/sessions/" + sid + "/edits", param)->status, 400);
    param.erase("version");
    EXPECT_EQ(srv.post("/sessions/" + sid + "/edits", param)->status, 400);
    EXPECT_EQ(srv.post("/sessions/s999/edits", del)->status, 404);

    r = srv.get("/sessions/" + sid + "/frames");
    ASSERT_EQ(r->status, 200);
    frames = body_of(r);
    EXPECT_EQ(frames["frames"].size(), view["num_frames"].get<std::size_t>());
    r = srv.get("/sessions/" + sid + "/frames?start=2&end=5");
    ASSERT_EQ(r->status, 200);
    EXPECT_EQ(body_of(r)["frames"].size(), 3u);
    EXPECT_EQ(body_of(r)["frames"][0], frames["frames"][2]);
    EXPECT_EQ(srv.get("/sessions/" + sid + "/frames?start=5&end=2")->status, 400);

    r = srv.post("/sessions/" + sid + "/export", json());
    ASSERT_EQ(r->status, 200) << r->body;
    const auto exported = load_pose_sequence(dir / body_of(r)["poses"].get<std::string>());
    EXPECT_EQ(to_json(exported)["frames"], frames["frames"]);
    EXPECT_LE(max_junction_gap(load_primitives(dir / body_of(r)["primitives"].get<std::string>())), 1e-9);
  }
  // Restart over the same directory: identical state.
  Running again(dir);
  EXPECT_EQ(body_of(again.get("/sessions/" + sid)), view);
  EXPECT_EQ(body_of(again.get("/sessions/" + sid + "/frames")), frames);
  EXPECT_EQ(body_of(again.get("/sequences")).size(), ds.split("train").size());
  EXPECT_FALSE(body_of(again.get("/concepts")).empty());
  EXPECT_EQ(body_of(again.get("/jobs/j1"))["status"], "succeeded");
  auto r = again.post("/sessions/" + sid + "/edits", {{"kind", "delete"}, {"target", 0}, {"version", 5}});
  EXPECT_EQ(r->status, 200) << r->body;
  r = again.post("/sessions", {{"script", {{"entries", json::array({json::array({labels[0], 1})})}, {"seed", 1}}}});
  EXPECT_NE(body_of(r)["id"], sid);
}
