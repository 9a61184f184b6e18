#ifndef SPZEROS_ERROR_HPP
#define SPZEROS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace spzeros
{

enum class errc {
    invalid_argument,
    non_convergence,
    fixed_point_violation,
    no_repelling_fixed_point,
    zero_fixed_point,
    degree_too_low,
    invalid_indices,
    zero_denominator,
    basin_escape,
    divergent_tail,
    divergent_moment,
    order_too_large,
    ambiguous_clustering,
    parse_error,
    validation_error,
};

constexpr std::string_view to_string(errc code) noexcept
{
    switch (code) {
        case errc::invalid_argument: return "InvalidArgument";
        case errc::non_convergence: return "NonConvergence";
        case errc::fixed_point_violation: return "FixedPointViolation";
        case errc::no_repelling_fixed_point: return "NoRepellingFixedPoint";
        case errc::zero_fixed_point: return "ZeroFixedPoint";
        case errc::degree_too_low: return "DegreeTooLow";
        case errc::invalid_indices: return "InvalidIndices";
        case errc::zero_denominator: return "ZeroDenominator";
        case errc::basin_escape: return "BasinEscape";
        case errc::divergent_tail: return "DivergentTail";
        case errc::divergent_moment: return "DivergentMoment";
        case errc::order_too_large: return "OrderTooLarge";
        case errc::ambiguous_clustering: return "AmbiguousClustering";
        case errc::parse_error: return "ParseError";
        case errc::validation_error: return "ValidationError";
    }
    return "Unknown";
}

// Every failure raised by the library carries one of the codes above so that
// callers (and the CLI exit-code mapping) can branch on it.
class error : public std::runtime_error
{
public:
    error(errc code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), m_code(code)
    {
    }

    [[nodiscard]] errc code() const noexcept
    {
        return m_code;
    }

private:
    errc m_code;
};

} // namespace spzeros

#endif
