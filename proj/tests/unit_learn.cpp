#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "candlecast/checkpoint.hpp"
#include "candlecast/forest.hpp"
#include "candlecast/kdtree.hpp"
#include "candlecast/layers.hpp"
#include "candlecast/model_io.hpp"
#include "candlecast/network.hpp"
#include "candlecast/train.hpp"

#include "support/fd_check.hpp"
#include "support/naive_oracles.hpp"

using namespace candlecast;
using nn::Tensor;
using nn::Tensor64;

namespace {

std::filesystem::path test_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "candlecast_unit_learn";
    std::filesystem::create_directories(dir);
    return dir;
}

Tensor64 random_tensor64(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor64 t(std::move(shape));
    for (auto& v : t.values()) v = scale * rng.uniform(-1.0, 1.0);
    return t;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = float(rng.uniform(-1.0, 1.0));
    return t;
}

} // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.rank() == 3);
    t.at(1, 2, 3) = 7.0f;
    CHECK(t[23] == 7.0f);
    CHECK(t.all_finite());
    t[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(5)), ContractError);
    const auto d = Tensor({2}, {1.0f, 2.0f}).cast<double>();
    CHECK(d[1] == 2.0);
}

TEST_CASE("convolution matches the direct-sum oracle") {
    Rng rng(100);
    SUBCASE("the 4x4x2 three-filter case") {
        const auto input = random_tensor64({4, 4, 2}, rng);
        const auto kernel = random_tensor64({3, 3, 2, 3}, rng);
        std::vector<double> bias = {0.1, -0.2, 0.3};
        Tensor64 out;
        nn::conv2d_forward(input, kernel, bias, out);
        const auto want = testsupport::naive_conv2d(input, kernel, bias);
        REQUIRE(out.same_shape(want));
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(testsupport::rel_error(out[i], want[i]) < 1e-12);
    }
    SUBCASE("random shapes") {
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t h = 1 + rng.uniform_below(6);
            const std::size_t w = 1 + rng.uniform_below(6);
            const std::size_t cin = 1 + rng.uniform_below(3);
            const std::size_t cout = 1 + rng.uniform_below(4);
            const auto input = random_tensor64({h, w, cin}, rng);
            const auto kernel = random_tensor64({3, 3, cin, cout}, rng);
            std::vector<double> bias(cout);
            for (auto& b : bias) b = rng.uniform(-0.5, 0.5);
            Tensor64 out;
            nn::conv2d_forward(input, kernel, bias, out);
            const auto want = testsupport::naive_conv2d(input, kernel, bias);
            for (std::size_t i = 0; i < out.size(); ++i)
                CHECK(testsupport::rel_error(out[i], want[i]) < 1e-12);
        }
    }
}

TEST_CASE("convolution gradients pass a finite-difference check") {
    Rng rng(200);
    auto input = random_tensor64({3, 4, 2}, rng);
    auto kernel = random_tensor64({3, 3, 2, 2}, rng, 0.5);
    std::vector<double> bias = {0.05, -0.1};
    const auto weights = random_tensor64({3, 4, 2}, rng);  // fixed linear functional

    const auto loss = [&] {
        Tensor64 out;
        nn::conv2d_forward(input, kernel, bias, out);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += weights[i] * out[i];
        return acc;
    };

    Tensor64 grad_input, grad_kernel;
    std::vector<double> grad_bias;
    nn::conv2d_backward(weights, input, kernel, grad_input, grad_kernel, grad_bias);

    CHECK(testsupport::fd_check_all(loss, input.data(), grad_input.data(), input.size()) <
          testsupport::kFdTolerance);
    CHECK(testsupport::fd_check_all(loss, kernel.data(), grad_kernel.data(), kernel.size()) <
          testsupport::kFdTolerance);
    CHECK(testsupport::fd_check_all(loss, bias.data(), grad_bias.data(), bias.size()) <
          testsupport::kFdTolerance);
}

TEST_CASE("max pooling matches the block oracle and floors odd edges") {
    Rng rng(300);
    const auto input = random_tensor64({6, 6, 3}, rng);
    Tensor64 out;
    std::vector<std::size_t> argmax;
    nn::maxpool2x2_forward(input, out, argmax);
    const auto want = testsupport::naive_maxpool2x2(input);
    REQUIRE(out.same_shape(want));
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == want[i]);

    const auto odd = random_tensor64({5, 7, 2}, rng);
    Tensor64 odd_out;
    nn::maxpool2x2_forward(odd, odd_out, argmax);
    CHECK(odd_out.shape() == std::vector<std::size_t>{2, 3, 2});
    const auto odd_want = testsupport::naive_maxpool2x2(odd);
    for (std::size_t i = 0; i < odd_out.size(); ++i) CHECK(odd_out[i] == odd_want[i]);
}

TEST_CASE("max pooling routes gradient to the first maximum in row-major order") {
    Tensor64 flat({2, 2, 1});
    flat.fill(3.5);
    Tensor64 out;
    std::vector<std::size_t> argmax;
    nn::maxpool2x2_forward(flat, out, argmax);
    REQUIRE(argmax.size() == 1);
    CHECK(argmax[0] == 0);  // top-left wins ties

    Tensor64 upstream({1, 1, 1});
    upstream[0] = 2.0;
    Tensor64 grad;
    nn::maxpool2x2_backward(upstream, argmax, flat.shape(), grad);
    CHECK(grad[0] == 2.0);
    CHECK(grad[1] == 0.0);
    CHECK(grad[2] == 0.0);
    CHECK(grad[3] == 0.0);
}

TEST_CASE("relu clamps forward and masks backward") {
    Tensor64 x({4}, {-1.0, 0.0, 2.0, -0.5});
    Tensor64 y;
    nn::relu_forward(x, y);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
    Tensor64 up({4}, {1.0, 1.0, 1.0, 1.0});
    Tensor64 grad;
    nn::relu_backward(up, x, grad);
    CHECK(grad[0] == 0.0);
    CHECK(grad[2] == 1.0);
}

TEST_CASE("dropout masks scale survivors by the keep probability") {
    Rng rng(400);
    const auto mask = nn::make_dropout_mask<float>(10000, 0.25, rng);
    std::size_t zeros = 0;
    for (float m : mask) {
        if (m == 0.0f)
            ++zeros;
        else
            CHECK(m == 1.0f / 0.75f);
    }
    CHECK(double(zeros) / 10000.0 == doctest::Approx(0.25).epsilon(0.1));

    Rng rng0(401);
    const auto keep_all = nn::make_dropout_mask<float>(64, 0.0, rng0);
    for (float m : keep_all) CHECK(m == 1.0f);

    Tensor x({3}, {1.0f, 2.0f, 3.0f});
    Tensor out;
    nn::dropout_apply(x, {0.0f, 2.0f, 0.0f}, out);
    CHECK(out[0] == 0.0f);
    CHECK(out[1] == 4.0f);
    CHECK(out[2] == 0.0f);
}

TEST_CASE("dense layer matches a hand matmul and its FD gradients") {
    Tensor64 input({2}, {1.5, -2.0});
    Tensor64 weights({2, 3}, {1, 2, 3, 4, 5, 6});
    std::vector<double> bias = {0.5, -0.5, 1.0};
    Tensor64 out;
    nn::dense_forward(input, weights, bias, out);
    CHECK(out[0] == doctest::Approx(1.5 * 1 - 2.0 * 4 + 0.5));
    CHECK(out[1] == doctest::Approx(1.5 * 2 - 2.0 * 5 - 0.5));
    CHECK(out[2] == doctest::Approx(1.5 * 3 - 2.0 * 6 + 1.0));

    Rng rng(500);
    const auto up = random_tensor64({3}, rng);
    const auto loss = [&] {
        Tensor64 y;
        nn::dense_forward(input, weights, bias, y);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += up[i] * y[i];
        return acc;
    };
    Tensor64 gi, gw;
    std::vector<double> gb;
    nn::dense_backward(up, input, weights, gi, gw, gb);
    CHECK(testsupport::fd_check_all(loss, input.data(), gi.data(), input.size()) <
          testsupport::kFdTolerance);
    CHECK(testsupport::fd_check_all(loss, weights.data(), gw.data(), weights.size()) <
          testsupport::kFdTolerance);
    CHECK(testsupport::fd_check_all(loss, bias.data(), gb.data(), bias.size()) <
          testsupport::kFdTolerance);
}

TEST_CASE("softmax cross entropy values and gradients") {
    Tensor64 logits({1, 3}, {0.0, 0.0, 0.0});
    auto r = nn::softmax_cross_entropy(logits, {1});
    CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    double prob_sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) prob_sum += r.probabilities[i];
    CHECK(prob_sum == doctest::Approx(1.0).epsilon(1e-12));

    // Gradient rows sum to zero.
    Rng rng(600);
    Tensor64 batch = random_tensor64({4, 3}, rng, 3.0);
    const std::vector<int> labels = {0, 2, 1, 2};
    auto rb = nn::softmax_cross_entropy(batch, labels);
    for (std::size_t row = 0; row < 4; ++row) {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i) s += rb.grad_logits[row * 3 + i];
        CHECK(std::abs(s) < 1e-12);
    }

    const auto loss = [&] { return nn::softmax_cross_entropy(batch, labels).loss; };
    CHECK(testsupport::fd_check_all(loss, batch.data(), rb.grad_logits.data(), batch.size()) <
          testsupport::kFdTolerance);

    CHECK_THROWS_AS(nn::softmax_cross_entropy(batch, {0, 1}), ContractError);
    CHECK_THROWS_AS(nn::softmax_cross_entropy(batch, {0, 1, 2, 3}), ContractError);
}

TEST_CASE("stacked network flatten sizes derive from the pool-floor rule") {
    const auto trace50 = nn::shape_trace(nn::make_stacked_spec(50));
    // 50 -> 25 -> 12 -> 6 -> 3 spatial, 96 channels: 3*3*96 = 864.
    bool found864 = false;
    for (const auto& s : trace50)
        if (s.size() == 1 && s[0] == 864) found864 = true;
    CHECK(found864);

    const auto trace20 = nn::shape_trace(nn::make_stacked_spec(20));
    // 20 -> 10 -> 5 -> 2 -> 1 spatial, 96 channels: 1*1*96 = 96.
    bool found96 = false;
    for (const auto& s : trace20)
        if (s.size() == 1 && s[0] == 96) found96 = true;
    CHECK(found96);
}

TEST_CASE("network depth rejects images too small to pool") {
    CHECK_THROWS_WITH_AS(nn::shape_trace(nn::make_stacked_spec(8)),
                         doctest::Contains("too small"), ContractError);
}

TEST_CASE("network parameters are named per layer in order") {
    nn::Network net(nn::make_stacked_spec(20), 1);
    std::vector<std::string> names;
    for (const auto& p : net.parameters()) names.push_back(p.name);
    const std::vector<std::string> want = {
        "conv1.kernel", "conv1.bias", "conv2.kernel", "conv2.bias",
        "conv3.kernel", "conv3.bias", "conv4.kernel", "conv4.bias",
        "dense1.weight", "dense1.bias", "dense2.weight", "dense2.bias",
    };
    CHECK(names == want);
    std::size_t total = 0;
    for (const auto& p : net.parameters()) total += p.value.size();
    CHECK(net.parameter_count() == total);
}

TEST_CASE("network init is a pure function of the seed") {
    nn::Network a(nn::make_stacked_spec(20), 42);
    nn::Network b(nn::make_stacked_spec(20), 42);
    nn::Network c(nn::make_stacked_spec(20), 43);
    bool all_equal = true, any_diff_c = false;
    for (std::size_t p = 0; p < a.parameters().size(); ++p) {
        const auto& av = a.parameters()[p].value;
        const auto& bv = b.parameters()[p].value;
        const auto& cv = c.parameters()[p].value;
        for (std::size_t i = 0; i < av.size(); ++i) {
            all_equal = all_equal && av[i] == bv[i];
            any_diff_c = any_diff_c || av[i] != cv[i];
        }
    }
    CHECK(all_equal);
    CHECK(any_diff_c);
}

TEST_CASE("network forward equals a hand-composed layer pipeline") {
    nn::NetworkSpec spec;
    spec.input_height = 4;
    spec.input_width = 4;
    spec.input_channels = 1;
    spec.layers = {nn::ConvSpec{2}, nn::MaxPoolSpec{}, nn::FlattenSpec{}, nn::DenseSpec{3, false}};
    nn::Network net(spec, 9);
    Rng rng(700);
    const auto input = random_tensor({4, 4, 1}, rng);

    const auto& params = net.parameters();
    REQUIRE(params.size() == 4);  // conv kernel/bias, dense weight/bias
    Tensor conv_out;
    nn::conv2d_forward(input, params[0].value,
                       std::vector<float>(params[1].value.values()), conv_out);
    Tensor conv_relu;
    nn::relu_forward(conv_out, conv_relu);
    Tensor pooled;
    std::vector<std::size_t> argmax;
    nn::maxpool2x2_forward(conv_relu, pooled, argmax);
    const auto flat = nn::flatten(pooled);
    Tensor want;
    nn::dense_forward(flat, params[2].value,
                      std::vector<float>(params[3].value.values()), want);

    const auto got = net.logits(input);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
}

TEST_CASE("residual block composes as relu(x + conv(relu(conv(x))))") {
    nn::NetworkSpec spec;
    spec.input_height = 3;
    spec.input_width = 3;
    spec.input_channels = 2;
    spec.layers = {nn::ResidualSpec{}, nn::FlattenSpec{}, nn::DenseSpec{2, false}};
    nn::Network net(spec, 13);
    Rng rng(800);
    const auto input = random_tensor({3, 3, 2}, rng);

    const auto& params = net.parameters();
    REQUIRE(params.size() == 6);
    CHECK(params[0].name == "res1.conv1.kernel");
    CHECK(params[2].name == "res1.conv2.kernel");
    Tensor z1, z2;
    nn::conv2d_forward(input, params[0].value,
                       std::vector<float>(params[1].value.values()), z1);
    Tensor a1;
    nn::relu_forward(z1, a1);
    nn::conv2d_forward(a1, params[2].value,
                       std::vector<float>(params[3].value.values()), z2);
    Tensor sum(input.shape());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = input[i] + z2[i];
    Tensor act;
    nn::relu_forward(sum, act);
    Tensor want;
    nn::dense_forward(nn::flatten(act), params[4].value,
                      std::vector<float>(params[5].value.values()), want);

    const auto got = net.logits(input);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
}

TEST_CASE("network gradients agree with finite differences end to end") {
    nn::NetworkSpec spec;
    spec.input_height = 4;
    spec.input_width = 4;
    spec.input_channels = 2;
    spec.layers = {nn::ConvSpec{2}, nn::MaxPoolSpec{}, nn::ResidualSpec{}, nn::FlattenSpec{},
                   nn::DenseSpec{3, true}, nn::DenseSpec{2, false}};
    nn::Network64 net(spec, 21);
    Rng rng(900);
    const auto input = random_tensor64({4, 4, 2}, rng);
    const std::vector<int> label = {1};

    const auto loss = [&] {
        std::vector<nn::LayerTape<double>> tape;
        Rng dropout_rng(1);
        const auto logits = net.forward_train(input, tape, dropout_rng);
        Tensor64 row({1, logits.size()}, logits.values());
        return nn::softmax_cross_entropy(row, label).loss;
    };

    std::vector<nn::LayerTape<double>> tape;
    Rng dropout_rng(1);
    const auto logits = net.forward_train(input, tape, dropout_rng);
    Tensor64 row({1, logits.size()}, logits.values());
    const auto ce = nn::softmax_cross_entropy(row, label);
    std::vector<Tensor64> grads;
    for (const auto& p : net.parameters()) grads.emplace_back(p.value.shape());
    Tensor64 grad_logits(logits.shape(), ce.grad_logits.values());
    net.backward(tape, grad_logits, grads);

    for (std::size_t p = 0; p < net.parameters().size(); ++p) {
        auto& value = net.parameters()[p].value;
        const double worst =
            testsupport::fd_check_all(loss, value.data(), grads[p].data(), value.size());
        CAPTURE(net.parameters()[p].name);
        CHECK(worst < testsupport::kFdTolerance);
    }
}

TEST_CASE("zeroed network predicts Down on tied logits") {
    nn::Network net(nn::make_stacked_spec(20), 3);
    for (auto& p : net.parameters()) p.value.fill(0.0f);
    Rng rng(1000);
    const auto pred = net.predict(random_tensor({20, 20, 3}, rng));
    CHECK(pred.label == Direction::Down);
    CHECK(pred.prob_up == doctest::Approx(0.5));
}

TEST_CASE("training is deterministic and a zero learning rate is a no-op") {
    nn::NetworkSpec spec;
    spec.input_height = 6;
    spec.input_width = 6;
    spec.input_channels = 1;
    spec.layers = {nn::ConvSpec{2}, nn::MaxPoolSpec{}, nn::DropoutSpec{0.25}, nn::FlattenSpec{},
                   nn::DenseSpec{2, false}};
    Rng rng(1100);
    std::vector<nn::TrainSample> samples;
    for (int i = 0; i < 8; ++i)
        samples.push_back({random_tensor({6, 6, 1}, rng),
                           i % 2 ? Direction::Up : Direction::Down});

    nn::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 77;

    nn::Network a(spec, 5), b(spec, 5);
    const auto ra = nn::train(a, samples, cfg);
    const auto rb = nn::train(b, samples, cfg);
    REQUIRE(ra.trace.size() == 3);
    for (std::size_t e = 0; e < ra.trace.size(); ++e) {
        CHECK(ra.trace[e].loss == rb.trace[e].loss);
        CHECK(ra.trace[e].accuracy == rb.trace[e].accuracy);
    }
    for (std::size_t p = 0; p < a.parameters().size(); ++p)
        for (std::size_t i = 0; i < a.parameters()[p].value.size(); ++i)
            CHECK(a.parameters()[p].value[i] == b.parameters()[p].value[i]);

    nn::Network frozen(spec, 5);
    const auto before = frozen.parameters();
    cfg.learning_rate = 0.0;
    nn::train(frozen, samples, cfg);
    for (std::size_t p = 0; p < before.size(); ++p)
        for (std::size_t i = 0; i < before[p].value.size(); ++i)
            CHECK(frozen.parameters()[p].value[i] == before[p].value[i]);
}

TEST_CASE("training memorizes a tiny labeled set") {
    Rng rng(1200);
    std::vector<nn::TrainSample> samples;
    for (int i = 0; i < 4; ++i)
        samples.push_back({random_tensor({12, 12, 3}, rng),
                           i % 2 ? Direction::Up : Direction::Down});
    nn::NetworkSpec spec;
    spec.input_height = 12;
    spec.input_width = 12;
    spec.input_channels = 3;
    spec.layers = {nn::ConvSpec{8}, nn::MaxPoolSpec{}, nn::FlattenSpec{},
                   nn::DenseSpec{16, true}, nn::DenseSpec{2, false}};
    nn::Network net(spec, 4);
    nn::TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 4;
    cfg.seed = 9;
    const auto result = nn::train(net, samples, cfg);
    CHECK(result.trace.back().accuracy == 1.0);
    CHECK(result.trace.back().loss < result.trace.front().loss);
    CHECK(nn::evaluate_accuracy(net, samples) == 1.0);
}

TEST_CASE("sgd also trains deterministically") {
    Rng rng(1250);
    std::vector<nn::TrainSample> samples;
    for (int i = 0; i < 4; ++i)
        samples.push_back({random_tensor({6, 6, 1}, rng),
                           i % 2 ? Direction::Up : Direction::Down});
    nn::NetworkSpec spec;
    spec.input_height = 6;
    spec.input_width = 6;
    spec.input_channels = 1;
    spec.layers = {nn::FlattenSpec{}, nn::DenseSpec{2, false}};
    nn::TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 2;
    cfg.optimizer = nn::Optimizer::Sgd;
    cfg.learning_rate = 0.1;
    nn::Network a(spec, 8), b(spec, 8);
    const auto ra = nn::train(a, samples, cfg);
    const auto rb = nn::train(b, samples, cfg);
    CHECK(ra.trace.back().loss == rb.trace.back().loss);
    CHECK(ra.trace.back().loss < ra.trace.front().loss);
}

TEST_CASE("weight checkpoints round-trip exactly") {
    const auto path = test_dir() / "weights.cfw";
    nn::Network original(nn::make_stacked_spec(20), 31);
    nn::save_weights(original, path);

    nn::Network restored(nn::make_stacked_spec(20), 99);
    nn::load_weights(restored, path);
    for (std::size_t p = 0; p < original.parameters().size(); ++p) {
        const auto& a = original.parameters()[p].value;
        const auto& b = restored.parameters()[p].value;
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }

    Rng rng(1300);
    const auto input = random_tensor({20, 20, 3}, rng);
    const auto la = original.logits(input);
    const auto lb = restored.logits(input);
    for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i] == lb[i]);
}

TEST_CASE("weight checkpoints refuse mismatched architectures and truncation") {
    const auto path = test_dir() / "weights_dim20.cfw";
    nn::Network src(nn::make_stacked_spec(20), 1);
    nn::save_weights(src, path);

    nn::Network wrong(nn::make_stacked_spec(50), 1);
    CHECK_THROWS_AS(nn::load_weights(wrong, path), IoError);

    // Loading into the wrong shape leaves the target untouched.
    nn::Network reference(nn::make_stacked_spec(50), 1);
    try {
        nn::load_weights(wrong, path);
    } catch (const IoError&) {
    }
    for (std::size_t p = 0; p < wrong.parameters().size(); ++p)
        for (std::size_t i = 0; i < wrong.parameters()[p].value.size(); ++i)
            CHECK(wrong.parameters()[p].value[i] == reference.parameters()[p].value[i]);

    const auto truncated = test_dir() / "truncated.cfw";
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        std::ofstream out(truncated, std::ios::binary);
        out.write(bytes.data(), long(bytes.size() / 2));
    }
    nn::Network target(nn::make_stacked_spec(20), 2);
    CHECK_THROWS_AS(nn::load_weights(target, truncated), IoError);

    const auto garbage = test_dir() / "garbage.cfw";
    std::ofstream(garbage, std::ios::binary) << "not a checkpoint";
    CHECK_THROWS_AS(nn::load_weights(target, garbage), IoError);
}

TEST_CASE("tensor dumps round-trip") {
    const auto path = test_dir() / "tensor.cft";
    Rng rng(1400);
    const auto t = random_tensor({3, 5, 2}, rng);
    nn::save_tensor(t, path);
    const auto back = nn::load_tensor(path);
    REQUIRE(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
}

TEST_CASE("kdtree handles the canonical small cases") {
    SUBCASE("single point is a single leaf") {
        const auto tree = ml::KdTree::build({1.0f, 2.0f}, 2);
        CHECK(tree.size() == 1);
        REQUIRE(tree.nodes().size() == 1);
        CHECK(tree.nodes()[0].leaf);
        const auto hits = tree.nearest(std::vector<float>{1.0f, 2.0f}, 1);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].index == 0);
        CHECK(hits[0].dist2 == 0.0);
    }
    SUBCASE("three collinear points split at the median") {
        const std::vector<float> pts = {0, 0, 1, 1, 2, 2};
        const auto tree = ml::KdTree::build(pts, 2, 1);
        REQUIRE_FALSE(tree.nodes().empty());
        const auto& root = tree.nodes()[0];
        CHECK_FALSE(root.leaf);
        CHECK(root.axis == 0);  // equal spread, lowest axis wins
        CHECK(root.threshold == 1.0f);

        const auto one = tree.nearest(std::vector<float>{0.9f, 0.9f}, 1);
        REQUIRE(one.size() == 1);
        CHECK(one[0].index == 1);

        const auto all = tree.nearest(std::vector<float>{0.9f, 0.9f}, 3);
        CHECK(all.size() == 3);
    }
    SUBCASE("k beyond the point count is a contract error") {
        const auto tree = ml::KdTree::build({0.0f, 1.0f}, 1);
        CHECK_THROWS_AS(tree.nearest(std::vector<float>{0.5f}, 3), ContractError);
        CHECK_THROWS_AS(ml::KdTree::build({}, 2), ContractError);
    }
}

TEST_CASE("kdtree equals linear scan including duplicate-point ties") {
    Rng rng(1500);
    const std::size_t n = 120, d = 6;
    std::vector<float> pts(n * d);
    for (auto& v : pts) v = float(rng.uniform_below(4));  // coarse grid forces ties
    const auto tree = ml::KdTree::build(pts, d, 4);
    for (int q = 0; q < 40; ++q) {
        std::vector<float> query(d);
        for (auto& v : query) v = float(rng.uniform(0.0, 3.0));
        for (std::size_t k : {1, 5, 17}) {
            const auto got = tree.nearest(query, k);
            const auto want = testsupport::linear_scan_knn(pts, d, query.data(), k);
            REQUIRE(got.size() == k);
            for (std::size_t i = 0; i < k; ++i) {
                CHECK(got[i].index == want[i].index);
                CHECK(got[i].dist2 == want[i].dist2);
            }
        }
    }
}

TEST_CASE("every stored point is its own nearest neighbor") {
    Rng rng(1600);
    const std::size_t n = 100, d = 8;
    std::vector<float> pts(n * d);
    for (auto& v : pts) v = float(rng.uniform01());
    const auto tree = ml::KdTree::build(pts, d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto hits = tree.nearest(tree.point(i), 1);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].dist2 == 0.0);
        // Duplicates resolve to the lowest index holding that location.
        const float* found = tree.point(hits[0].index);
        for (std::size_t j = 0; j < d; ++j) CHECK(found[j] == tree.point(i)[j]);
    }
}

TEST_CASE("knn vote ties go Down") {
    const std::vector<float> pts = {0.0f, 1.0f};
    const auto tree = ml::KdTree::build(pts, 1);
    const std::vector<Direction> labels = {Direction::Up, Direction::Down};
    const float query = 0.4f;
    const auto result = ml::knn_classify(tree, labels, &query, 2);
    CHECK(result.label == Direction::Down);
    REQUIRE(result.neighbors.size() == 2);
    CHECK(result.neighbors[0].index == 0);

    const auto up = ml::knn_classify(tree, labels, &query, 1);
    CHECK(up.label == Direction::Up);
}

namespace {

struct OracleSplit {
    std::size_t feature = 0;
    float threshold = 0.0f;
    double impurity = 1e9;
};

// Exhaustive Gini scan over all features and candidate thresholds, with the
// same tie rules the tree documents.
OracleSplit best_split_oracle(const std::vector<float>& xs, std::size_t n, std::size_t d,
                              const std::vector<Direction>& ys) {
    OracleSplit best;
    for (std::size_t f = 0; f < d; ++f) {
        std::set<float> values;
        for (std::size_t i = 0; i < n; ++i) values.insert(xs[i * d + f]);
        for (float thr : values) {
            if (thr == *values.rbegin()) continue;  // max value splits nothing
            std::size_t lu = 0, ld = 0, ru = 0, rd = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool left = xs[i * d + f] <= thr;
                const bool is_up = ys[i] == Direction::Up;
                if (left)
                    (is_up ? lu : ld) += 1;
                else
                    (is_up ? ru : rd) += 1;
            }
            const auto gini = [](double u, double dn) {
                const double t = u + dn;
                if (t == 0.0) return 0.0;
                return 1.0 - (u / t) * (u / t) - (dn / t) * (dn / t);
            };
            const double nl = double(lu + ld), nr = double(ru + rd);
            const double weighted =
                (nl * gini(double(lu), double(ld)) + nr * gini(double(ru), double(rd))) /
                double(n);
            if (weighted + 1e-12 < best.impurity) {
                best = {f, thr, weighted};
            }
        }
    }
    return best;
}

} // namespace

TEST_CASE("decision tree finds the oracle-best split on a separable set") {
    // x0 <= 0.4 is Down, x0 > 0.4 is Up; x1 is noise.
    const std::vector<float> xs = {0.2f, 0.3f, 0.4f, 0.9f, 0.7f, 0.1f, 0.9f, 0.8f};
    const std::vector<Direction> ys = {Direction::Down, Direction::Down, Direction::Up,
                                       Direction::Up};
    Rng rng(1);
    const auto tree =
        ml::DecisionTree::fit(xs, 4, 2, ys, {0, 1, 2, 3}, 0, 2, rng);
    const auto oracle = best_split_oracle(xs, 4, 2, ys);
    REQUIRE_FALSE(tree.nodes().empty());
    const auto& root = tree.nodes()[0];
    CHECK_FALSE(root.leaf);
    CHECK(root.feature == oracle.feature);
    CHECK(root.threshold == oracle.threshold);
    CHECK(oracle.impurity == 0.0);

    for (std::size_t i = 0; i < 4; ++i)
        CHECK(tree.predict(&xs[i * 2]) == ys[i]);
}

TEST_CASE("split ties resolve to the lowest feature then the lowest threshold") {
    SUBCASE("duplicate features prefer the lower index") {
        const std::vector<float> xs = {0, 0, 0, 0, 1, 1, 1, 1};
        const std::vector<Direction> ys = {Direction::Down, Direction::Down, Direction::Up,
                                           Direction::Up};
        Rng rng(2);
        const auto tree = ml::DecisionTree::fit(xs, 4, 2, ys, {0, 1, 2, 3}, 0, 2, rng);
        CHECK(tree.nodes()[0].feature == 0);
    }
    SUBCASE("equal-impurity thresholds prefer the lower value") {
        // Labels D,U,U,D over values 0..3: thresholds 0 and 2 tie.
        const std::vector<float> xs = {0, 1, 2, 3};
        const std::vector<Direction> ys = {Direction::Down, Direction::Up, Direction::Up,
                                           Direction::Down};
        Rng rng(3);
        const auto tree = ml::DecisionTree::fit(xs, 4, 1, ys, {0, 1, 2, 3}, 0, 2, rng);
        CHECK(tree.nodes()[0].threshold == 0.0f);
    }
}

TEST_CASE("forest with one tree and no bootstrap reduces to the plain tree") {
    Rng rng(1700);
    const std::size_t n = 60, d = 5;
    std::vector<float> xs(n * d);
    std::vector<Direction> ys(n);
    for (auto& v : xs) v = float(rng.uniform01());
    for (std::size_t i = 0; i < n; ++i)
        ys[i] = xs[i * d] + xs[i * d + 2] > 1.0f ? Direction::Up : Direction::Down;

    ml::ForestParams params;
    params.n_trees = 1;
    params.bootstrap = false;
    params.max_features = d;
    const auto forest = ml::RandomForest::fit(xs, n, d, ys, params, 11);

    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    Rng unused(0);
    const auto tree = ml::DecisionTree::fit(xs, n, d, ys, rows, 0, 2, unused);

    for (std::size_t i = 0; i < n; ++i)
        CHECK(forest.predict(&xs[i * d]).label == tree.predict(&xs[i * d]));
}

TEST_CASE("forest refit with the same seed is identical node for node") {
    Rng rng(1800);
    const std::size_t n = 50, d = 4;
    std::vector<float> xs(n * d);
    std::vector<Direction> ys(n);
    for (auto& v : xs) v = float(rng.uniform01());
    for (std::size_t i = 0; i < n; ++i)
        ys[i] = xs[i * d + 1] > 0.5f ? Direction::Up : Direction::Down;

    ml::ForestParams params;
    params.n_trees = 7;
    const auto a = ml::RandomForest::fit(xs, n, d, ys, params, 123);
    const auto b = ml::RandomForest::fit(xs, n, d, ys, params, 123);
    REQUIRE(a.trees().size() == b.trees().size());
    for (std::size_t t = 0; t < a.trees().size(); ++t) {
        const auto& ta = a.trees()[t];
        const auto& tb = b.trees()[t];
        CHECK(ta.bootstrap_seed == tb.bootstrap_seed);
        CHECK(ta.feature_seed == tb.feature_seed);
        REQUIRE(ta.tree.nodes().size() == tb.tree.nodes().size());
        for (std::size_t i = 0; i < ta.tree.nodes().size(); ++i) {
            const auto& na = ta.tree.nodes()[i];
            const auto& nb = tb.tree.nodes()[i];
            CHECK(na.leaf == nb.leaf);
            CHECK(na.up == nb.up);
            CHECK(na.down == nb.down);
            CHECK(na.feature == nb.feature);
            CHECK(na.threshold == nb.threshold);
            CHECK(na.left == nb.left);
            CHECK(na.right == nb.right);
        }
    }
}

TEST_CASE("forest vote edge cases") {
    using ml::TreeNode;
    const auto leaf_tree = [](std::uint64_t up, std::uint64_t down) {
        ml::RandomForest::TreeRecord rec;
        TreeNode node;
        node.leaf = true;
        node.up = up;
        node.down = down;
        rec.tree = ml::DecisionTree::from_nodes({node}, 2);
        return rec;
    };

    const auto unanimous = ml::RandomForest::from_parts(
        {leaf_tree(3, 0), leaf_tree(5, 1)}, 2, false);
    const float x[2] = {0.0f, 0.0f};
    const auto v = unanimous.predict(x);
    CHECK(v.label == Direction::Up);
    CHECK(v.vote_fraction == 1.0);

    const auto split_vote = ml::RandomForest::from_parts(
        {leaf_tree(3, 0), leaf_tree(0, 3)}, 2, false);
    const auto tie = split_vote.predict(x);
    CHECK(tie.label == Direction::Down);
    CHECK(tie.vote_fraction == 0.5);
}

TEST_CASE("single-class training data is flagged and predicts that class") {
    const std::vector<float> xs = {0.1f, 0.5f, 0.9f, 0.3f};
    const std::vector<Direction> ys(4, Direction::Up);
    ml::ForestParams params;
    params.n_trees = 3;
    const auto forest = ml::RandomForest::fit(xs, 4, 1, ys, params, 5);
    CHECK(forest.single_class());
    CHECK(forest.predict(&xs[0]).label == Direction::Up);
    CHECK_THROWS_AS(
        ml::RandomForest::fit(xs, 1, 1, {Direction::Up}, params, 5), ContractError);
}

TEST_CASE("forest and knn models survive checkpoint round-trips") {
    Rng rng(1900);
    const std::size_t n = 40, d = 6;
    std::vector<float> xs(n * d);
    std::vector<Direction> ys(n);
    for (auto& v : xs) v = float(rng.uniform01());
    for (std::size_t i = 0; i < n; ++i)
        ys[i] = xs[i * d] > 0.5f ? Direction::Up : Direction::Down;

    ml::ForestParams params;
    params.n_trees = 9;
    const auto forest = ml::RandomForest::fit(xs, n, d, ys, params, 77);
    const auto forest_path = test_dir() / "model_forest.cfm";
    ml::save_forest(forest, forest_path);
    CHECK(ml::peek_model_kind(forest_path) == ml::ModelKind::Forest);
    const auto forest_back = ml::load_forest(forest_path);
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = forest.predict(&xs[i * d]);
        const auto b = forest_back.predict(&xs[i * d]);
        CHECK(a.label == b.label);
        CHECK(a.vote_fraction == b.vote_fraction);
    }

    ml::KnnModel knn;
    knn.tree = ml::KdTree::build(xs, d, 4);
    knn.labels = ys;
    knn.k = 5;
    const auto knn_path = test_dir() / "model_knn.cfm";
    ml::save_knn(knn, knn_path);
    CHECK(ml::peek_model_kind(knn_path) == ml::ModelKind::Knn);
    const auto knn_back = ml::load_knn(knn_path);
    CHECK(knn_back.k == 5);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(ml::knn_predict(knn, &xs[i * d]) == ml::knn_predict(knn_back, &xs[i * d]));

    const auto bogus = test_dir() / "bogus.cfm";
    std::ofstream(bogus, std::ios::binary) << "XXXXnothing";
    CHECK_THROWS_AS(ml::peek_model_kind(bogus), IoError);
    CHECK_THROWS_AS(ml::load_forest(knn_path), IoError);
}
