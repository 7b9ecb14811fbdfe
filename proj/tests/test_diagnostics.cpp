#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "support/grad_check.hpp"
#include "treegrad/diagnostics.hpp"

using namespace treegrad;

namespace {

RatioRecord rec(std::size_t epoch, std::size_t id, int depth, double ratio) {
    return RatioRecord{epoch, id, depth, ratio, 0.0};
}

}  // namespace

TEST_CASE("ratio is one for an identity backward map") {
    Model m = Model::zeros(ModelKind::rnn, 1);
    m.rnn().W = Matrix{{1.0, 0.0}};
    m.classifier.weights(3, 0) = 1.0;
    m.classifier.bias[3] = 0.5;
    ForwardTrace t = forward(BinaryTree::parse("(607 5000)"), m, 6);
    backward(t, 6, m);
    REQUIRE(gradient_ratio(t).has_value());
    CHECK(*gradient_ratio(t) == 1.0);
}

TEST_CASE("ratio is zero when the composer has no weights") {
    SeededRng rng(6);
    Model m = treegrad::testing::random_model(ModelKind::rnn, 3, rng, 1.0);
    m.rnn().W = Matrix(3, 6);
    ForwardTrace t = forward(BinaryTree::parse("((5000 607) 4200)"), m, 6);
    backward(t, 6, m);
    CHECK(*gradient_ratio(t) == 0.0);
}

TEST_CASE("ratio of a single keyword leaf is one") {
    for (auto kind : {ModelKind::rnn, ModelKind::rlstm}) {
        SeededRng rng(1);
        const Model m = treegrad::testing::random_model(kind, 4, rng, 1.0);
        ForwardTrace t = forward(BinaryTree::leaf(321), m, 3);
        backward(t, 3, m);
        CHECK(*gradient_ratio(t) == 1.0);
        CHECK(make_ratio_record(1, 0, t).keyword_depth == 0);
    }
}

TEST_CASE("ratio agrees with finite-difference error vectors") {
    SeededRng rng(31);
    const Model m = treegrad::testing::random_model(ModelKind::rnn, 2, rng, 1.0);
    const BinaryTree tree = BinaryTree::parse("(((607 1500) 2500) 3500)");
    const int label = 2;
    ForwardTrace t = forward(tree, m, label);
    backward(t, label, m);

    // Keyword error: perturb the keyword's embedding row.
    Model probe = m;
    auto row = probe.embeddings.row(607);
    const Vector kw_rep(std::vector<double>(row.begin(), row.end()));
    const Vector kw_err = finite_diff_grad(
        [&](const Vector& x) {
            std::copy(x.values().begin(), x.values().end(), row.begin());
            return forward(tree, probe, label).loss;
        },
        kw_rep, 1e-5);

    // Root error: perturb the root representation fed to the classifier.
    const Vector root_err = finite_diff_grad(
        [&](const Vector& r) {
            const Vector p = softmax(affine(m.classifier.weights, r, m.classifier.bias));
            return -std::log(p[label]);
        },
        t.states[t.root()].rep, 1e-5);

    const double expected = l2_norm(kw_err) / l2_norm(root_err);
    CHECK(*gradient_ratio(t) == doctest::Approx(expected).epsilon(1e-4));
    CHECK(make_ratio_record(4, 17, t).keyword_depth == 3);
}

TEST_CASE("zero root error gives an undefined ratio") {
    Model m = Model::zeros(ModelKind::rlstm, 2);
    ForwardTrace t = forward(BinaryTree::parse("(5 1200)"), m, 0);
    backward(t, 0, m);
    CHECK_FALSE(gradient_ratio(t).has_value());
    const RatioRecord r = make_ratio_record(1, 0, t);
    CHECK_FALSE(r.defined());

    const RatioSummary s = summarize({r, rec(1, 1, 1, 0.5)});
    CHECK(s.undefined == 1);
    REQUIRE(s.cells.size() == 1);
    CHECK(s.cells[0].count == 1);
}

TEST_CASE("gradient_ratio preconditions") {
    const Model m = Model::init(ModelKind::rnn, 2, 1);
    ForwardTrace untouched = forward(BinaryTree::parse("(5 1200)"), m, 0);
    CHECK_THROWS(gradient_ratio(untouched));
    ForwardTrace no_keyword = forward(BinaryTree::parse("(1500 1200)"), m, 0);
    backward(no_keyword, 0, m);
    CHECK_THROWS(gradient_ratio(no_keyword));
}

TEST_CASE("rlstm memory ratio") {
    SeededRng rng(5);
    const Model m = treegrad::testing::random_model(ModelKind::rlstm, 3, rng, 1.0);
    ForwardTrace t = forward(BinaryTree::parse("((607 1500) 2500)"), m, 6);
    backward(t, 6, m);
    const RatioRecord r = make_ratio_record(1, 0, t);
    CHECK(r.ratio > 0.0);
    CHECK(r.mem_ratio >= 0.0);

    const Model rnn = treegrad::testing::random_model(ModelKind::rnn, 3, rng, 1.0);
    ForwardTrace u = forward(BinaryTree::parse("((607 1500) 2500)"), rnn, 6);
    backward(u, 6, rnn);
    CHECK(make_ratio_record(1, 0, u).mem_ratio == 0.0);
}

TEST_CASE("quantiles") {
    CHECK(quantile_sorted({0.1, 0.2, 0.3}, 0.5) == doctest::Approx(0.2));
    CHECK(quantile_sorted({1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile_sorted({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_sorted({7.0}, 0.75) == 7.0);
}

TEST_CASE("summarize") {
    SUBCASE("single record") {
        const RatioSummary s = summarize({rec(1, 0, 4, 0.5)});
        REQUIRE(s.cells.size() == 1);
        CHECK(s.cells[0].epoch == 1);
        CHECK(s.cells[0].depth == 4);
        CHECK(s.cells[0].count == 1);
        CHECK(s.cells[0].median == 0.5);
    }
    SUBCASE("median of three") {
        const RatioSummary s = summarize({rec(1, 0, 2, 0.3), rec(1, 1, 2, 0.1), rec(1, 2, 2, 0.2)});
        CHECK(s.cells[0].median == doctest::Approx(0.2));
        CHECK(s.cells[0].q1 <= s.cells[0].median);
        CHECK(s.cells[0].median <= s.cells[0].q3);
    }
    SUBCASE("fractions") {
        const RatioSummary s =
            summarize({rec(2, 0, 3, 0.5), rec(2, 1, 3, 2.0), rec(2, 2, 3, 3.0), rec(2, 3, 5, 1e-9)});
        const SummaryCell* c = s.find(2, 3);
        REQUIRE(c != nullptr);
        CHECK(c->frac_exploding == doctest::Approx(2.0 / 3.0));
        CHECK(c->frac_vanished == 0.0);
        CHECK(s.find(2, 5)->frac_vanished == 1.0);
        CHECK(s.find(1, 3) == nullptr);
        CHECK(s.max_epoch() == 2);
    }
    SUBCASE("cells are ordered") {
        const RatioSummary s = summarize({rec(2, 0, 1, 1.0), rec(1, 1, 5, 1.0), rec(1, 2, 2, 1.0)});
        REQUIRE(s.cells.size() == 3);
        CHECK(s.cells[0].depth == 2);
        CHECK(s.cells[1].depth == 5);
        CHECK(s.cells[2].epoch == 2);
    }
    CHECK_THROWS_AS(summarize({}), std::invalid_argument);
}

TEST_CASE("record csv") {
    CHECK(records_to_csv({}) == "epoch,tree_id,keyword_depth,ratio\n");
    std::vector<RatioRecord> records = {rec(2, 5, 3, 0.125), rec(1, 9, 4, 1e-300), rec(1, 2, 4, 3.5),
                                        rec(1, 7, 1, std::nan(""))};
    records[0].mem_ratio = 0.75;
    const std::string csv = records_to_csv(records);
    CHECK(csv ==
          "epoch,tree_id,keyword_depth,ratio\n1,7,1,nan\n1,2,4,3.5\n1,9,4,1e-300\n2,5,3,0.125\n");
    const auto back = parse_records_csv(csv);
    REQUIRE(back.size() == 4);
    CHECK(back[1] == rec(1, 2, 4, 3.5));
    CHECK(std::isnan(back[0].ratio));

    const auto with_mem = parse_records_csv(records_to_csv(records, true));
    CHECK(with_mem.back() == records[0]);

    const auto dir = std::filesystem::temp_directory_path() / "treegrad_test_diag";
    std::filesystem::create_directories(dir);
    write_records_csv(records, dir / "r.csv");
    CHECK(read_records_csv(dir / "r.csv").size() == 4);
    CHECK_THROWS_AS(parse_records_csv("epoch,tree_id,keyword_depth,ratio\n1,2,x,0.5\n"), ParseError);
    CHECK_THROWS_AS(write_records_csv(records, "/nonexistent/dir/r.csv"), std::runtime_error);
}

TEST_CASE("summary csv") {
    const RatioSummary s = summarize({rec(1, 0, 2, 0.3), rec(1, 1, 2, 0.1), rec(2, 2, 1, 4.0)});
    const std::string csv = summary_to_csv(s);
    CHECK(csv.rfind("epoch,depth,count,q1,median,q3,frac_exploding,frac_vanished\n1,2,2,", 0) == 0);
    const RatioSummary back = parse_summary_csv(csv);
    REQUIRE(back.cells.size() == 2);
    CHECK(back.cells[1].median == 4.0);
    CHECK(back.cells[0].q3 == s.cells[0].q3);
}

TEST_CASE("sink collects one record per example per epoch") {
    const Dataset d = gen_dataset_exp1(3, {40, 10, 5}, 4);
    TrainConfig c = TrainConfig::defaults_for(ModelKind::rlstm);
    c.dim = 5;
    c.threads = 2;
    RatioSink sink;
    Model m = Model::init(ModelKind::rlstm, c.dim, 1);
    AdaGradState s = AdaGradState::for_model(m);
    const auto observer = collect_ratios(sink);
    train_epoch(m, d.train, c, s, 1, observer);
    train_epoch(m, d.train, c, s, 2, observer);
    CHECK(sink.size() == 80);
    for (const auto& r : sink.sorted()) {
        CHECK(r.keyword_depth >= 1);
        CHECK(r.keyword_depth <= 29);
        CHECK(r.keyword_depth == d.train[r.tree_id].keyword_depth);
    }
}

TEST_CASE("ratio collection does not perturb training") {
    const Dataset d = gen_dataset_exp1(2, {60, 20, 5}, 7);
    for (auto kind : {ModelKind::rnn, ModelKind::rlstm}) {
        TrainConfig c = TrainConfig::defaults_for(kind);
        c.dim = 6;
        c.max_epochs = 3;
        c.record_time = false;
        RatioSink sink;
        TrainHooks hooks;
        hooks.on_example = collect_ratios(sink);
        const TrainResult observed = train(Model::init(kind, c.dim, 3), d.train, d.dev, c, hooks);
        const TrainResult plain = train(Model::init(kind, c.dim, 3), d.train, d.dev, c);
        CHECK(sink.size() == 60 * observed.log.epochs.size());
        CHECK(serialize_checkpoint(observed.best) == serialize_checkpoint(plain.best));
        CHECK(observed.log.to_csv() == plain.log.to_csv());
    }
}
