// Acceptance checks: one printed pass/fail line per criterion.
