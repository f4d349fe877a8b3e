#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "ahr/dataset.hpp"
#include "ahr/report.hpp"
#include "ahr/strategy.hpp"

using namespace ahr;

namespace {

void put_be32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                                (unsigned char)(v >> 8), (unsigned char)v};
    os.write(reinterpret_cast<const char*>(b), 4);
}

// write a tiny IDX pair with independent serialization code
void write_idx_fixture(const std::string& img_path, const std::string& lab_path,
                       const std::vector<std::vector<unsigned char>>& images,
                       const std::vector<unsigned char>& labels, std::uint32_t h,
                       std::uint32_t w, std::uint32_t img_magic = 0x803,
                       std::uint32_t lab_magic = 0x801,
                       std::uint32_t label_count_override = 0) {
    std::ofstream imgs(img_path, std::ios::binary);
    put_be32(imgs, img_magic);
    put_be32(imgs, std::uint32_t(images.size()));
    put_be32(imgs, h);
    put_be32(imgs, w);
    for (const auto& im : images)
        imgs.write(reinterpret_cast<const char*>(im.data()), std::streamsize(im.size()));
    std::ofstream labs(lab_path, std::ios::binary);
    put_be32(labs, lab_magic);
    put_be32(labs, label_count_override ? label_count_override : std::uint32_t(labels.size()));
    labs.write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size()));
}

struct TempFiles {
    std::vector<std::string> paths;
    ~TempFiles() {
        for (const auto& p : paths) std::remove(p.c_str());
    }
    std::string add(std::string p) {
        paths.push_back(p);
        return p;
    }
};

} // namespace

TEST_CASE("load_idx: round-trips a hand-written fixture") {
    TempFiles tmp;
    const std::string ip = tmp.add("fix_images.idx");
    const std::string lp = tmp.add("fix_labels.idx");
    write_idx_fixture(ip, lp, {{0, 51, 102, 255}, {255, 204, 153, 0}}, {3, 7}, 2, 2);
    const LabeledDataset ds = load_idx(ip, lp);
    REQUIRE(ds.size() == 2);
    REQUIRE(ds.x.cols == 4);
    REQUIRE(ds.labels == std::vector<int>{3, 7});
    REQUIRE(ds.x.at(0, 0) == 0.0);
    REQUIRE(ds.x.at(0, 3) == 1.0);
    REQUIRE(ds.x.at(0, 1) == Catch::Approx(51.0 / 255.0));
    REQUIRE(ds.x.at(1, 1) == Catch::Approx(204.0 / 255.0));
}

TEST_CASE("load_idx: bad magics and count mismatch are errors") {
    TempFiles tmp;
    const std::string ip = tmp.add("bad_images.idx");
    const std::string lp = tmp.add("bad_labels.idx");

    write_idx_fixture(ip, lp, {{1, 2, 3, 4}}, {0}, 2, 2, 0x999, 0x801);
    REQUIRE_THROWS_WITH(load_idx(ip, lp), Catch::Matchers::ContainsSubstring("magic"));

    write_idx_fixture(ip, lp, {{1, 2, 3, 4}}, {0}, 2, 2, 0x803, 0x999);
    REQUIRE_THROWS_WITH(load_idx(ip, lp), Catch::Matchers::ContainsSubstring("magic"));

    write_idx_fixture(ip, lp, {{1, 2, 3, 4}}, {0, 1}, 2, 2);
    REQUIRE_THROWS_WITH(load_idx(ip, lp), Catch::Matchers::ContainsSubstring("count"));

    REQUIRE_THROWS_AS(load_idx("does_not_exist.idx", lp), Error);
}

TEST_CASE("make_synthetic: deterministic per seed, distinct across seeds") {
    const TaskStream a = make_synthetic(5, 3, 2, 8, 20, 4.0);
    const TaskStream b = make_synthetic(5, 3, 2, 8, 20, 4.0);
    const TaskStream c = make_synthetic(6, 3, 2, 8, 20, 4.0);
    REQUIRE(a.tasks.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        REQUIRE(a.tasks[t].train.x.data == b.tasks[t].train.x.data);
        REQUIRE(a.tasks[t].test.x.data == b.tasks[t].test.x.data);
        REQUIRE(a.tasks[t].train.labels == b.tasks[t].train.labels);
    }
    REQUIRE(a.tasks[0].train.x.data != c.tasks[0].train.x.data);
}

TEST_CASE("make_synthetic: structure (task ids, class partition, sizes)") {
    const TaskStream s = make_synthetic(9, 4, 3, 5, 10, 3.0, 6);
    REQUIRE(s.input_dim == 5);
    REQUIRE(s.provenance == "synthetic");
    std::set<int> all;
    for (std::size_t t = 0; t < 4; ++t) {
        REQUIRE(s.tasks[t].id == int(t) + 1);
        REQUIRE(s.tasks[t].classes.size() == 3);
        REQUIRE(s.tasks[t].train.size() == 30);
        REQUIRE(s.tasks[t].test.size() == 18);
        for (int c : s.tasks[t].classes) all.insert(c);
    }
    REQUIRE(all.size() == 12);
    s.check_disjoint();
}

TEST_CASE("make_synthetic: clusters are separable by their true centers") {
    // nearest-center classification recovers >= 99% of labels at high sep
    const TaskStream s = make_synthetic(11, 2, 2, 6, 100, 8.0);
    // estimate centers from train data
    std::map<int, std::pair<std::vector<double>, std::size_t>> acc;
    for (const auto& t : s.tasks)
        for (std::size_t r = 0; r < t.train.size(); ++r) {
            auto& [sum, count] = acc[t.train.labels[r]];
            if (sum.empty()) sum.assign(6, 0.0);
            for (std::size_t d = 0; d < 6; ++d) sum[d] += t.train.x.at(r, d);
            ++count;
        }
    std::map<int, std::vector<double>> centers;
    for (auto& [cls, sc] : acc) {
        for (double& v : sc.first) v /= double(sc.second);
        centers[cls] = sc.first;
    }
    std::size_t correct = 0, total = 0;
    for (const auto& t : s.tasks)
        for (std::size_t r = 0; r < t.test.size(); ++r, ++total) {
            int best = -1;
            double best_d = 0.0;
            for (const auto& [cls, c] : centers) {
                const double d = squared_distance(t.test.x.row(r), c.data(), 6);
                if (best < 0 || d < best_d) {
                    best = cls;
                    best_d = d;
                }
            }
            if (best == t.test.labels[r]) ++correct;
        }
    REQUIRE(double(correct) / double(total) >= 0.99);
}

TEST_CASE("split_tasks: natural label order by default") {
    LabeledDataset train, test;
    train.x = Matrix(8, 2);
    train.labels = {3, 0, 1, 2, 0, 1, 2, 3};
    test = train;
    const TaskStream s = split_tasks(train, test, 2, 2);
    REQUIRE(s.tasks[0].classes == std::vector<int>{0, 1});
    REQUIRE(s.tasks[1].classes == std::vector<int>{2, 3});
    REQUIRE(s.tasks[0].train.size() == 4);
    REQUIRE(s.split_seed == 0);
}

TEST_CASE("split_tasks: seeded shuffle is deterministic and T=1 takes all") {
    LabeledDataset ds;
    ds.x = Matrix(6, 1);
    ds.labels = {0, 1, 2, 0, 1, 2};
    const TaskStream a = split_tasks(ds, ds, 3, 1, 77);
    const TaskStream b = split_tasks(ds, ds, 3, 1, 77);
    for (std::size_t t = 0; t < 3; ++t) REQUIRE(a.tasks[t].classes == b.tasks[t].classes);

    const TaskStream whole = split_tasks(ds, ds, 1, 3);
    REQUIRE(whole.tasks.size() == 1);
    REQUIRE(whole.tasks[0].train.size() == 6);

    REQUIRE_THROWS_AS(split_tasks(ds, ds, 4, 1), Error);
}

TEST_CASE("stratified_subset: per-class floor, deterministic") {
    LabeledDataset ds;
    ds.x = Matrix(30, 1);
    for (std::size_t i = 0; i < 30; ++i) {
        ds.x.at(i, 0) = double(i);
        ds.labels.push_back(int(i % 3));
    }
    const LabeledDataset sub = stratified_subset(ds, 9, 13);
    REQUIRE(sub.size() == 9);
    std::map<int, int> counts;
    for (int l : sub.labels) counts[l]++;
    for (auto& [cls, n] : counts) REQUIRE(n == 3);
    const LabeledDataset again = stratified_subset(ds, 9, 13);
    REQUIRE(sub.x.data == again.x.data);
    // total >= size returns everything
    REQUIRE(stratified_subset(ds, 100, 13).size() == 30);
}

TEST_CASE("report: CSV layout for a 2-task run") {
    RunReport r;
    r.strategy = "AHR";
    r.config_hash = "abc";
    r.seed = 1;
    r.accuracy = {{0.5}, {0.25, 0.75}};
    r.cumulative_accuracy = {0.5, 0.5};
    r.final_accuracy = 0.5;
    r.stored_bytes = {100, 100};
    r.samples_processed = {10, 20};
    REQUIRE(report_to_csv(r) ==
            "after_task,on_task_1,on_task_2,final\n"
            "1,0.5,,0.5\n"
            "2,0.25,0.75,0.5\n");
}

TEST_CASE("report: JSON round-trip is byte-identical and omits timing") {
    RunReport r;
    r.strategy = "FT";
    r.config_hash = "deadbeef";
    r.seed = 42;
    r.accuracy = {{0.123456789012345}, {0.1, 1.0 / 3.0}};
    r.cumulative_accuracy = {0.123456789012345, 0.2};
    r.final_accuracy = 0.2;
    r.stored_bytes = {0, 0};
    r.samples_processed = {100, 200};
    r.wall_seconds = 12.5;

    const std::string j1 = report_to_json(r);
    REQUIRE(j1.find("wall_seconds") == std::string::npos);
    const RunReport back = report_from_json(j1);
    REQUIRE(report_to_json(back) == j1);
    REQUIRE(back.accuracy[1][1] == 1.0 / 3.0);
    REQUIRE(back.wall_seconds == 0.0);

    const std::string with_timing = report_to_json(r, true);
    REQUIRE(with_timing.find("wall_seconds") != std::string::npos);
}

TEST_CASE("emit_report: writes files, rejects unknown formats") {
    TempFiles tmp;
    RunReport r;
    r.strategy = "AHR";
    r.accuracy = {{1.0}};
    r.cumulative_accuracy = {1.0};
    r.final_accuracy = 1.0;
    r.stored_bytes = {8};
    r.samples_processed = {4};
    const std::string jp = tmp.add("report_t.json");
    emit_report(r, "json", jp);
    std::ifstream is(jp);
    REQUIRE(bool(is));
    REQUIRE_THROWS_AS(emit_report(r, "xml", "report_t.xml"), Error);
}

TEST_CASE("aggregate_final_accuracy: mean and SEM") {
    const Aggregate a = aggregate_final_accuracy("AHR", {0.9, 1.0, 0.8});
    REQUIRE(a.runs == 3);
    REQUIRE(a.mean == Catch::Approx(0.9));
    REQUIRE(a.sem == Catch::Approx(0.1 / std::sqrt(3.0)));
    REQUIRE(aggregate_final_accuracy("x", {0.5}).sem == 0.0);
    REQUIRE_THROWS_AS(aggregate_final_accuracy("x", {}), Error);
}

TEST_CASE("config hash: stable for equal configs, sensitive to changes") {
    RunConfig a, b;
    REQUIRE(config_hash(a) == config_hash(b));
    b.train.lambda = 31.0;
    REQUIRE(config_hash(a) != config_hash(b));
    const RunConfig back = config_from_json(config_to_json(a));
    REQUIRE(config_hash(back) == config_hash(a));
}

TEST_CASE("strategy names round-trip") {
    for (Strategy s : {Strategy::AHR, Strategy::AHR_lossless, Strategy::AHR_lossless_mini,
                       Strategy::AHR_lossy_mini, Strategy::FT, Strategy::FTE, Strategy::Joint})
        REQUIRE(strategy_from_string(to_string(s)) == s);
    REQUIRE_THROWS_AS(strategy_from_string("SGD"), Error);
}

TEST_CASE("run_strategy: same seed gives byte-identical report JSON") {
    const TaskStream stream = make_synthetic(21, 3, 2, 8, 30, 5.0);
    RunConfig cfg;
    cfg.hidden = {16};
    cfg.latent_dim = 3;
    cfg.train.epochs = 2;
    cfg.train.minibatch_size = 8;
    cfg.train.budget_M = 30;
    cfg.train.rfa.steps = 50;
    cfg.train.lambda = 1.0;
    const std::string a = report_to_json(run_strategy(Strategy::AHR, stream, cfg, 3));
    const std::string b = report_to_json(run_strategy(Strategy::AHR, stream, cfg, 3));
    REQUIRE(a == b);
    const std::string c = report_to_json(run_strategy(Strategy::AHR, stream, cfg, 4));
    REQUIRE(a != c);
}

TEST_CASE("run_strategy: report shape and accounting invariants") {
    const TaskStream stream = make_synthetic(22, 3, 2, 8, 30, 5.0);
    RunConfig cfg;
    cfg.hidden = {16};
    cfg.latent_dim = 3;
    cfg.train.epochs = 2;
    cfg.train.minibatch_size = 8;
    cfg.train.budget_M = 30;
    cfg.train.rfa.steps = 50;
    cfg.train.lambda = 1.0;

    const RunReport ahr = run_strategy(Strategy::AHR, stream, cfg, 1);
    REQUIRE(ahr.accuracy.size() == 3);
    for (std::size_t a = 0; a < 3; ++a) REQUIRE(ahr.accuracy[a].size() == a + 1);
    REQUIRE(ahr.final_accuracy == ahr.cumulative_accuracy.back());
    const std::size_t dec_bytes = 8 * ((16 * 3 + 16) + (8 * 16 + 8));
    for (std::size_t a = 0; a < 3; ++a) {
        REQUIRE(ahr.stored_bytes[a] > dec_bytes);
        REQUIRE(ahr.samples_processed[a] > 0);
    }

    const RunReport ft = run_strategy(Strategy::FT, stream, cfg, 1);
    for (std::size_t a = 0; a < 3; ++a) REQUIRE(ft.stored_bytes[a] == 0);

    const RunReport fte = run_strategy(Strategy::FTE, stream, cfg, 1);
    // FT-E stores raw rows, no decoder charge, within the AHR byte budget
    const std::size_t ahr_budget_bytes = (cfg.train.budget_M * 3 + (16 * 3 + 16) + (8 * 16 + 8)) * 8;
    for (std::size_t a = 0; a < 3; ++a) REQUIRE(fte.stored_bytes[a] <= ahr_budget_bytes);
}
