#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "anosov/bounds.hpp"
#include "anosov/entropy.hpp"
#include "anosov/spectrum.hpp"

namespace anosov {

// Keys are written in insertion order, which is the documented order.
using Json = nlohmann::ordered_json;

Json to_json(const UnitTangentState& s);
Json to_json(const SurfaceModel& m);

// {model, theta0, T, exponents, multiplicities, chi_plus, trace_halfwidth, ...}.
// chi_plus is null when the run did not converge.
Json to_json(const LyapunovSpectrum& s);
Json to_json(const InequalityCheck& c);
// Array of inequality objects.
Json to_json(const BoundReport& r);
Json to_json(const AnosovFit& f);
Json to_json(const AnosovCertificate& c);
Json to_json(const SplittingCensus& c);
Json to_json(const InclusionResult& r);
Json to_json(const RhoResult& r);
Json to_json(const BowenConfig& c);
Json to_json(const LocalEntropy& h);
Json to_json(const Suprema& s);
Json to_json(const PartitionReport& p);
Json to_json(const EntropyReport& r);

// theta_id,n,inside,escaped,indeterminate,ball_measure,nu,nu_lower,halfwidth.
// ball_measure is the Liouville measure of the region sampled at that depth;
// nu = ball_measure * (inside + indeterminate) / samples, compensated for the
// density.
std::string bowen_counts_csv(const std::vector<BowenProfile>& profiles);

// Shortest decimal that round-trips, locale independent.
std::string format_double(double v);

// Two-column series "x,y" with the given header.
std::string series_csv(const std::string& x_name, const std::string& y_name,
                       const std::vector<std::pair<double, double>>& points);

}  // namespace anosov
