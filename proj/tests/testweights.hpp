#pragma once

// Weight constructions shared across the test binaries.

#include "rbp/weight.hpp"

namespace testw {

// step weight: -1 on (-1,0), +1 on (0,1)
inline rbp::WeightSpec sgn_weight() {
    return rbp::parse_weight("sgn(x)", -1.0, 1.0, {0.0}, {"x", "x"});
}

// sgn(x)/((1-|x|) log^2((1-|x|)/e)) on (-1,1): slowly varying |r|-integral at
// both endpoints, turning point at 0
inline rbp::WeightSpec log_weight() {
    return rbp::parse_weight("sgn(x)/((1-abs(x))*log((1-abs(x))/e)^2)", -1.0, 1.0, {0.0},
                             {"-1/log((1+x)/e)", "1/log((1-x)/e)"});
}

// odd weight 1/(x (1-log|x|)^2) on (-1,1): slowly varying at the turning point
inline rbp::WeightSpec slow_odd_weight() {
    return rbp::parse_weight("1/(x*(1-log(abs(x)))^2)", -1.0, 1.0, {0.0},
                             {"-1/(1-log(-x))", "1/(1-log(x))"});
}

// constant positive weight on [0,1] (input for the scaling perturbation)
inline rbp::WeightSpec unit_weight() {
    return rbp::parse_weight("1", 0.0, 1.0, {}, {"x"});
}

// positive half of the slow odd weight on [0,1] (scaling-perturbation input)
inline rbp::WeightSpec slow_pos_weight() {
    return rbp::parse_weight("1/(x*(1-log(x))^2)", 0.0, 1.0, {}, {"1/(1-log(x))"});
}

}  // namespace testw
