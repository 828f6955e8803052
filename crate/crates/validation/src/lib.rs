//! Host package for the `acceptance` test target; see `tests/acceptance.rs`.

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    /// `PASS [id] name: detail`, or `FAIL ...`.
    pub fn line(&self) -> String {
        format!("{} [{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let v = Verdict { id: 3, name: "x", pass: false, detail: "d".into() };
        assert_eq!(v.line(), "FAIL [3] x: d");
    }
}
