#pragma once

#include "devbound/errors.hpp"

#include <string>
#include <string_view>

namespace devbound {

/// Universal constants that the theory only bounds. None of these values is
/// ground truth: tests fit ratios instead of trusting them.
///
///  - c0, c_anti: binomial anti-concentration P(Y/n >= q) >= c0 e^{-C n D(q||p)};
///    c0 also sets the tail threshold c0/(2J) used by the deviation quantile.
///  - c1_eps, c2_eps: sandwich of that quantile by phi.
///  - dkw_c1, dkw_c2: localized DKW tail c1 exp(-c2 min(t^2, t sqrt(nV))).
///  - hp_a1, hp_a2: scale of the high-probability quantile band.
struct ConcentrationConstants {
    double c0 = 0.125;
    double c_anti = 4.0;
    double c1_eps = 4.0;
    double c2_eps = 0.25;
    double dkw_c1 = 2.0;
    double dkw_c2 = 2.0;
    double hp_a1 = 1.0;
    double hp_a2 = 1.0;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) throw ValidationError(std::string("constants.") + name + " must be > 0");
        };
        positive(c0, "c0");
        positive(c_anti, "c_anti");
        positive(c1_eps, "c1_eps");
        positive(c2_eps, "c2_eps");
        positive(dkw_c1, "dkw_c1");
        positive(dkw_c2, "dkw_c2");
        positive(hp_a1, "hp_a1");
        positive(hp_a2, "hp_a2");
        if (!(c0 < 0.25)) throw ValidationError("constants.c0 must be < 1/4");
        if (!(c_anti >= 1.0)) throw ValidationError("constants.c_anti must be >= 1");
        if (!(c1_eps >= 1.0)) throw ValidationError("constants.c1_eps must be >= 1");
    }

    /// Override one constant by name; used by `--const name=value`.
    void set(std::string_view name, double value) {
        if (name == "c0") c0 = value;
        else if (name == "c_anti" || name == "C") c_anti = value;
        else if (name == "c1_eps" || name == "C1") c1_eps = value;
        else if (name == "c2_eps" || name == "c2") c2_eps = value;
        else if (name == "dkw_c1") dkw_c1 = value;
        else if (name == "dkw_c2") dkw_c2 = value;
        else if (name == "hp_a1" || name == "a1") hp_a1 = value;
        else if (name == "hp_a2" || name == "a2") hp_a2 = value;
        else throw ValidationError("unknown constant '" + std::string(name) + "'");
        validate();
    }
};

} // namespace devbound
