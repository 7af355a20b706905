"""Formula corpus shared by the unit tests and the acceptance suite."""

# canonical-form formulas: parse(render(parse(text))) must equal parse(text),
# and for already-canonical text, render(parse(text)) == text
ROUND_TRIP = [
    "y ~ 1",
    "y ~ 0",
    "y ~ 1 + x",
    "y ~ 0 + x",
    "y ~ 1 + x + z",
    "y ~ 1 + (1|g)",
    "y ~ 0 + (1|g)",
    "y ~ 1 + x + (1|school) + (1|neigh)",
    "attain ~ 1 + x + (1|school) + (1|neigh)",
    "y ~ 1 + (1|school) + (1|neigh) + (1|district)",
    "y ~ 1 + (1|school:neigh)",
    "y ~ 1 + (1|school:neigh) + (1|school)",
    "y ~ 1 + (1|school) + (1|neigh) + (1|school:neigh)",
    "y ~ 1 + x + z + (1|a) + (1|b) + (1|a:b)",
    "flow ~ 1 + dist + corr(origin, dest)",
    "flow ~ 0 + dist + corr(origin, dest)",
    "flow ~ 1 + corr(origin, dest)",
    "y ~ 1 + corr(a, b) + (1|c)",
    "y ~ 1 + x + corr(a, b) + (1|a:b)",
    "unemp ~ 1 + (1|state) + (1|year)",
    "unemp ~ 1 + (1|state) + (1|year) + (1|state:year)",
    "score ~ 1 + ses + age + (1|rater) + (1|student)",
    "y ~ 1 + x1 + x2 + x3 + (1|g1) + (1|g2) + (1|g3) + (1|g4)",
    "y_2 ~ 1 + x_1 + (1|group_a)",
    "Y ~ 1 + X + (1|G)",
    "y ~ 1 + (1|a) + (1|b) + (1|c) + (1|a:b) + (1|a:c) + (1|b:c)",
    "resp ~ 1 + cov + (1|hospital) + (1|gp)",
]

# whitespace/ordering variants: parse to the same formula as their partner
EQUIVALENT = [
    ("y~1+x+(1|a)", "y ~ 1 + x + (1|a)"),
    ("  y ~ 1+ x +(1 | a )  ", "y ~ 1 + x + (1|a)"),
    ("y ~ x", "y ~ 1 + x"),
    ("flow~1+dist+corr( origin , dest )", "flow ~ 1 + dist + corr(origin, dest)"),
    ("y\t~\t1\t+\t(1|a:b)", "y ~ 1 + (1|a:b)"),
]

# (malformed text, 1-based error position)
MALFORMED = [
    ("", 1),
    ("y", 2),                                # missing '~'
    ("y ~", 4),                              # empty right-hand side
    ("~ 1 + x", 1),                          # missing response
    ("y ~ 2", 5),                            # number other than 0/1
    ("y ~ 1 + ", 9),                         # dangling '+'
    ("y ~ 1 + (x|g)", 10),                   # random term must start with 1
    ("y ~ 1 + (1|g", 13),                    # unclosed random term
    ("y ~ 1 + (1|a:b:c)", 15),               # higher-order interaction
    ("y ~ 1 + corr(a)", 15),                 # corr needs two columns
    ("y ~ 1 + corr(a, a)", 17),              # corr columns must differ
    ("y ~ 1 + (1|a:a)", 14),                 # interaction columns must differ
    ("y ~ 1 + (1|g) + x", 17),               # fixed term after random term
    ("y ~ 1 + (1|g) + (1|g)", 17),           # duplicate classification
    ("y ~ 1 + corr(a, b) + (1|a)", 22),      # column reused across random terms
    ("y ~ 1 + y", 9),                        # response reused as predictor
    ("y ~ 1 + (1|y)", 9),                    # response reused as classification
    ("y ~ 1 + x + x", 13),                   # duplicate fixed term
    ("y ~ 1 + 1", 9),                        # duplicate intercept marker
    ("y ~ 0 + 1", 9),                        # conflicting intercept markers
    ("y ~ 1 + x$z", 10),                     # illegal character
    ("y ~~ 1", 4),                           # doubled operator
]
