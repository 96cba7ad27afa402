#include "bnlab/init.hpp"

#include <cmath>
#include <string>

#include "bnlab/error.hpp"

namespace bnlab {

InitKind parse_init_kind(std::string_view name) {
    if (name == "xavier") return InitKind::xavier;
    if (name == "he") return InitKind::he;
    if (name == "gaussian") return InitKind::gaussian;
    throw ValueError("unknown init scheme '" + std::string(name) + "'");
}

std::string_view to_string(InitKind kind) {
    switch (kind) {
        case InitKind::xavier: return "xavier";
        case InitKind::he: return "he";
        case InitKind::gaussian: return "gaussian";
    }
    return "?";
}

FanCounts fan_counts(const Shape& shape) {
    for (auto d : shape)
        if (d == 0) throw DimensionError("non-positive dimension in " + shape_string(shape));
    switch (shape.size()) {
        case 1: return {shape[0], shape[0]};
        case 2: return {shape[1], shape[0]};
        case 4: {
            const std::size_t field = shape[2] * shape[3];
            return {shape[1] * field, shape[0] * field};
        }
        default: throw DimensionError("cannot derive fan counts from shape " + shape_string(shape));
    }
}

double init_variance(const InitScheme& scheme, FanCounts fans) {
    switch (scheme.kind) {
        case InitKind::xavier: return 2.0 / static_cast<double>(fans.fan_in + fans.fan_out);
        case InitKind::he: return 2.0 / static_cast<double>(fans.fan_in);
        case InitKind::gaussian: return scheme.scale * scheme.scale;
    }
    return 0.0;
}

Tensor init_tensor(const Shape& shape, const InitScheme& scheme, SeededRng& rng) {
    return init_tensor(shape, scheme, fan_counts(shape), rng);
}

Tensor init_tensor(const Shape& shape, const InitScheme& scheme, FanCounts fans, SeededRng& rng) {
    if (scheme.kind != InitKind::gaussian && (fans.fan_in == 0 || fans.fan_out == 0))
        throw DimensionError("fan counts must be positive");
    Tensor t(shape);
    const double stddev = std::sqrt(init_variance(scheme, fans));
    for (auto& v : t.storage()) v = stddev * rng.normal();
    return t;
}

}  // namespace bnlab
