#include "candlecast/network.hpp"

namespace candlecast::nn {

std::vector<std::vector<std::size_t>> shape_trace(const NetworkSpec& spec) {
    if (spec.input_height == 0 || spec.input_width == 0 || spec.input_channels == 0)
        throw ContractError("network: input shape must be non-zero");
    if (spec.layers.empty()) throw ContractError("network: no layers");

    std::vector<std::vector<std::size_t>> shapes;
    shapes.push_back({spec.input_height, spec.input_width, spec.input_channels});

    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& cur = shapes.back();
        const std::string where = "layer " + std::to_string(i);
        const auto& layer = spec.layers[i];

        if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
            if (cur.size() != 3) throw ContractError(where + ": conv needs a spatial input");
            if (conv->filters == 0) throw ContractError(where + ": conv needs filters > 0");
            shapes.push_back({cur[0], cur[1], conv->filters});
        } else if (std::holds_alternative<MaxPoolSpec>(layer)) {
            if (cur.size() != 3) throw ContractError(where + ": pool needs a spatial input");
            if (cur[0] < 2 || cur[1] < 2)
                throw ContractError(where + ": pool input " + shape_string(cur) +
                                    " is below 2x2; image dimension too small for this depth");
            shapes.push_back({cur[0] / 2, cur[1] / 2, cur[2]});
        } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
            if (drop->rate < 0.0 || drop->rate >= 1.0)
                throw ContractError(where + ": dropout rate must be in [0,1)");
            shapes.push_back(cur);
        } else if (std::holds_alternative<ResidualSpec>(layer)) {
            if (cur.size() != 3) throw ContractError(where + ": residual needs a spatial input");
            shapes.push_back(cur);
        } else if (std::holds_alternative<FlattenSpec>(layer)) {
            std::size_t n = 1;
            for (std::size_t d : cur) n *= d;
            shapes.push_back({n});
        } else {
            const auto& dense = std::get<DenseSpec>(layer);
            if (cur.size() != 1) throw ContractError(where + ": dense needs a flat input");
            if (dense.units == 0) throw ContractError(where + ": dense needs units > 0");
            shapes.push_back({dense.units});
        }
    }
    return shapes;
}

NetworkSpec make_stacked_spec(std::size_t image_dim, std::size_t channels) {
    NetworkSpec spec;
    spec.input_height = image_dim;
    spec.input_width = image_dim;
    spec.input_channels = channels;
    spec.layers = {
        ConvSpec{32},  MaxPoolSpec{},
        ConvSpec{48},  MaxPoolSpec{}, DropoutSpec{0.25},
        ConvSpec{64},  MaxPoolSpec{},
        ConvSpec{96},  MaxPoolSpec{}, DropoutSpec{0.25},
        FlattenSpec{},
        DenseSpec{256, true}, DropoutSpec{0.5},
        DenseSpec{2, false},
    };
    shape_trace(spec); // validates the depth fits the image size
    return spec;
}

NetworkSpec make_residual_spec(std::size_t image_dim, std::size_t channels) {
    NetworkSpec spec;
    spec.input_height = image_dim;
    spec.input_width = image_dim;
    spec.input_channels = channels;
    spec.layers = {
        ConvSpec{32},  ResidualSpec{}, MaxPoolSpec{},
        ConvSpec{48},  ResidualSpec{}, MaxPoolSpec{}, DropoutSpec{0.25},
        ConvSpec{64},  ResidualSpec{}, MaxPoolSpec{},
        ConvSpec{96},  ResidualSpec{}, MaxPoolSpec{}, DropoutSpec{0.25},
        FlattenSpec{},
        DenseSpec{256, true}, DropoutSpec{0.5},
        DenseSpec{2, false},
    };
    shape_trace(spec);
    return spec;
}

} // namespace candlecast::nn
