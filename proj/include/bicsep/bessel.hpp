#pragma once

namespace bicsep {

enum class BesselKind { J, I, K };

// Cylinder functions of real order nu >= 0 and real argument.
double bessel_j(double nu, double x);
double bessel_i(double nu, double x);
double bessel_k(double nu, double x);

double bessel(BesselKind kind, double nu, double x);

}  // namespace bicsep
