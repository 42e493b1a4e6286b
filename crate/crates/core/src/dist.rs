//! Tail probabilities for the reference distributions used in the tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, StudentsT};

/// Two-sided p-value `P(|t_df| >= |t|)`.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let d = StudentsT::new(0.0, 1.0, df).expect("t degrees of freedom");
    (2.0 * d.sf(t.abs())).min(1.0)
}

/// Upper-tail p-value `P(F_{df1,df2} >= f)`. Non-positive statistics map to 1.
pub fn f_upper(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if !f.is_finite() {
        return 0.0;
    }
    let d = FisherSnedecor::new(df1, df2).expect("F degrees of freedom");
    d.sf(f)
}

/// Upper-tail p-value `P(chi^2_df >= x)`.
pub fn chi2_upper(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if !x.is_finite() {
        return 0.0;
    }
    let d = ChiSquared::new(df).expect("chi-squared degrees of freedom");
    d.sf(x)
}
