use super::lexer::{tokenize, Tok, Token};
use super::{DslSource, ErrorKind, ParseError};
use crate::stl::{inside_cuboid, outside_cuboid, Cuboid, Formula, Interval, LinearPredicate, PosDims};

type PResult<T> = Result<T, ParseError>;

/// Parses DSL text into a formula over the drone state. Reports the first
/// error in source order.
pub fn parse(src: &DslSource<'_>) -> PResult<Formula<f64>> {
    if !(src.dt > 0.0 && src.dt.is_finite()) {
        return Err(ParseError::new(ErrorKind::BadInterval, 0, 0, "sampling time dt must be positive"));
    }
    let tokens = tokenize(src.text)?;
    let mut p = Parser { src, tokens, pos: 0 };
    let phi = p.expression()?;
    let t = p.peek();
    if t.tok != Tok::Eof {
        let msg = format!("unexpected {} after a complete formula", t.tok.describe());
        return Err(p.err_at(t, ErrorKind::Syntax, msg));
    }
    Ok(phi)
}

struct Parser<'a> {
    src: &'a DslSource<'a>,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Token {
        self.tokens[self.pos].clone()
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, t: Token, kind: ErrorKind, message: impl Into<String>) -> ParseError {
        ParseError::new(kind, t.start, t.end, message)
    }

    fn expect(&mut self, want: Tok, context: &str) -> PResult<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.err_at(
                t.clone(),
                ErrorKind::Syntax,
                format!("expected {} {context}, found {}", want.describe(), t.tok.describe()),
            ))
        }
    }

    fn expression(&mut self) -> PResult<Formula<f64>> {
        let mut terms = vec![self.and_expr()?];
        while self.peek().tok == Tok::Pipe {
            self.next();
            terms.push(self.and_expr()?);
        }
        Ok(if terms.len() == 1 { terms.pop().expect("one term") } else { Formula::Or(terms) })
    }

    fn and_expr(&mut self) -> PResult<Formula<f64>> {
        let mut terms = vec![self.term()?];
        while self.peek().tok == Tok::Amp {
            self.next();
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().expect("one term") } else { Formula::And(terms) })
    }

    fn term(&mut self) -> PResult<Formula<f64>> {
        if self.peek().tok == Tok::Tilde {
            self.next();
            return Ok(self.term()?.not());
        }
        let mut phi = self.primary()?;
        while self.peek().tok == Tok::Dot {
            self.next();
            phi = self.method(phi)?;
        }
        Ok(phi)
    }

    fn primary(&mut self) -> PResult<Formula<f64>> {
        let t = self.next();
        match &t.tok {
            Tok::LParen => {
                let phi = self.expression()?;
                self.expect(Tok::RParen, "to close the parenthesis")?;
                Ok(phi)
            }
            Tok::Ident(id) if id == "TRUE" => Ok(Formula::True),
            Tok::Ident(id) if id == "STL_formulas" => {
                self.expect(Tok::Dot, "after STL_formulas")?;
                let f = self.next();
                match &f.tok {
                    Tok::Ident(name) if name == "inside_cuboid" || name == "outside_cuboid" => {
                        let inside = name == "inside_cuboid";
                        self.expect(Tok::LParen, "to open the argument list")?;
                        let c = self.region()?;
                        self.expect(Tok::RParen, "to close the argument list")?;
                        Ok(if inside {
                            inside_cuboid(&c, PosDims::DRONE)
                        } else {
                            outside_cuboid(&c, PosDims::DRONE)
                        })
                    }
                    Tok::Ident(name) if name == "linear" => self.linear(),
                    Tok::Ident(name) => Err(self.err_at(
                        f.clone(),
                        ErrorKind::Syntax,
                        format!("unknown function 'STL_formulas.{name}'; expected inside_cuboid or outside_cuboid"),
                    )),
                    other => Err(self.err_at(
                        f.clone(),
                        ErrorKind::Syntax,
                        format!("expected a function name after 'STL_formulas.', found {}", other.describe()),
                    )),
                }
            }
            Tok::Num(_) | Tok::Str(_) => Err(self.err_at(
                t.clone(),
                ErrorKind::TypeError,
                format!("expected a formula, found {}", t.tok.describe()),
            )),
            other => Err(self.err_at(
                t.clone(),
                ErrorKind::Syntax,
                format!(
                    "expected a formula (STL_formulas.inside_cuboid(...), STL_formulas.outside_cuboid(...), TRUE, '~' or '('), found {}",
                    other.describe()
                ),
            )),
        }
    }

    fn method(&mut self, recv: Formula<f64>) -> PResult<Formula<f64>> {
        let t = self.next();
        let name = match &t.tok {
            Tok::Ident(n) => n.clone(),
            other => {
                return Err(self.err_at(
                    t.clone(),
                    ErrorKind::Syntax,
                    format!("expected a method name after '.', found {}", other.describe()),
                ))
            }
        };
        match name.as_str() {
            "eventually" | "always" => {
                self.expect(Tok::LParen, &format!("after .{name}"))?;
                let interval = self.interval()?;
                self.expect(Tok::RParen, &format!("to close .{name}(...)"))?;
                Ok(if name == "eventually" { recv.eventually(interval) } else { recv.always(interval) })
            }
            "until" => {
                self.expect(Tok::LParen, "after .until")?;
                let other = self.expression()?;
                self.expect(Tok::Comma, "after the first argument of .until")?;
                let interval = self.interval()?;
                self.expect(Tok::RParen, "to close .until(...)")?;
                Ok(recv.until(other, interval))
            }
            _ => Err(self.err_at(
                t,
                ErrorKind::Syntax,
                format!("unknown method '{name}'; expected eventually, always or until"),
            )),
        }
    }

    fn number(&mut self, what: &str) -> PResult<(f64, Token)> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok((v, t)),
            Tok::Eof | Tok::RParen | Tok::Comma | Tok::RBrack => Err(self.err_at(
                t.clone(),
                ErrorKind::Syntax,
                format!("expected {what}, found {}", t.tok.describe()),
            )),
            _ => Err(self.err_at(t.clone(), ErrorKind::TypeError, format!("expected {what}, found {}", t.tok.describe()))),
        }
    }

    fn interval(&mut self) -> PResult<Interval> {
        let (t1, tok1) = self.number("a start time in seconds")?;
        self.expect(Tok::Comma, "between the two times")?;
        let (t2, tok2) = self.number("an end time in seconds")?;
        let lo = self.steps(t1, &tok1)?;
        let hi = self.steps(t2, &tok2)?;
        Interval::new(lo, hi).map_err(|_| {
            self.err_at(
                tok2,
                ErrorKind::BadInterval,
                format!("interval end {t2} s comes before its start {t1} s"),
            )
        })
    }

    fn steps(&self, t: f64, tok: &Token) -> PResult<usize> {
        if t < 0.0 {
            return Err(self.err_at(tok.clone(), ErrorKind::BadInterval, format!("time {t} s is negative")));
        }
        let steps = (t / self.src.dt).round();
        if steps > 1e7 {
            return Err(self.err_at(tok.clone(), ErrorKind::BadInterval, format!("time {t} s is too large")));
        }
        Ok(steps as usize)
    }

    fn region(&mut self) -> PResult<Cuboid<f64>> {
        let t = self.peek();
        match &t.tok {
            Tok::Str(name) | Tok::Ident(name) => {
                self.next();
                self.src.scene.object(name).map(|o| o.bounds).ok_or_else(|| {
                    let known: Vec<&str> = self.src.scene.names().collect();
                    self.err_at(
                        t.clone(),
                        ErrorKind::UnknownObject,
                        format!("no object named '{name}' in the scene (known: {})", known.join(", ")),
                    )
                })
            }
            Tok::LBrack => {
                self.next();
                let (vals, span) = self.numbers(Tok::RBrack)?;
                self.expect(Tok::RBrack, "to close the bounds list")?;
                self.bounds(vals, span)
            }
            Tok::Num(_) => {
                let (vals, span) = self.numbers(Tok::RParen)?;
                self.bounds(vals, span)
            }
            _ => Err(self.err_at(
                t.clone(),
                ErrorKind::TypeError,
                format!("expected an object name or six bounds, found {}", t.tok.describe()),
            )),
        }
    }

    /// Comma-separated numbers up to (not including) `end`.
    fn numbers(&mut self, end: Tok) -> PResult<(Vec<f64>, (usize, usize))> {
        let first = self.peek();
        let mut vals = Vec::new();
        let mut last_end = first.start;
        loop {
            let (v, t) = self.number("a number")?;
            vals.push(v);
            last_end = last_end.max(t.end);
            if self.peek().tok == Tok::Comma {
                self.next();
                if self.peek().tok == end {
                    break;
                }
            } else {
                break;
            }
        }
        Ok((vals, (first.start, last_end)))
    }

    fn bounds(&self, vals: Vec<f64>, span: (usize, usize)) -> PResult<Cuboid<f64>> {
        let arr: [f64; 6] = vals.try_into().map_err(|v: Vec<f64>| {
            ParseError::new(
                ErrorKind::TypeError,
                span.0,
                span.1,
                format!("bounds need exactly 6 numbers (xmin, xmax, ymin, ymax, zmin, zmax), found {}", v.len()),
            )
        })?;
        Cuboid::from_bounds(arr).map_err(|_| {
            ParseError::new(ErrorKind::TypeError, span.0, span.1, "bounds must satisfy min < max on every axis")
        })
    }

    fn linear(&mut self) -> PResult<Formula<f64>> {
        self.expect(Tok::LParen, "to open the argument list")?;
        let open = self.expect(Tok::LBrack, "to start the coefficient list")?;
        let (coeffs, span) = self.numbers(Tok::RBrack)?;
        self.expect(Tok::RBrack, "to close the coefficient list")?;
        self.expect(Tok::Comma, "before the offset")?;
        let (offset, _) = self.number("an offset")?;
        self.expect(Tok::RParen, "to close the argument list")?;
        if coeffs.len() != PosDims::DRONE.state_dim {
            return Err(ParseError::new(
                ErrorKind::TypeError,
                open.start,
                span.1,
                format!("linear predicates need {} coefficients, found {}", PosDims::DRONE.state_dim, coeffs.len()),
            ));
        }
        LinearPredicate::new(coeffs, offset)
            .map(Formula::Pred)
            .map_err(|_| ParseError::new(ErrorKind::TypeError, span.0, span.1, "coefficients are all zero"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::bundled_scene;

    fn parse_rt(text: &str, dt: f64) -> PResult<Formula<f64>> {
        let scene = bundled_scene("reach_avoid").unwrap();
        parse(&DslSource::new(text, &scene, dt))
    }

    fn obj(name: &str) -> Cuboid<f64> {
        bundled_scene("reach_avoid").unwrap().object(name).unwrap().bounds
    }

    #[test]
    fn figure_style_reach_avoid() {
        let phi = parse_rt(
            r#"STL_formulas.inside_cuboid("goal").eventually(0, 50) & STL_formulas.outside_cuboid("obstacle1").always(0, 50)"#,
            1.0,
        )
        .unwrap();
        let iv = Interval::new(0, 50).unwrap();
        let want = inside_cuboid(&obj("goal"), PosDims::DRONE)
            .eventually(iv)
            .and(outside_cuboid(&obj("obstacle1"), PosDims::DRONE).always(iv));
        assert_eq!(phi, want);
    }

    #[test]
    fn seconds_convert_to_steps() {
        let phi = parse_rt(r#"STL_formulas.inside_cuboid("goal").eventually(0, 30)"#, 0.5).unwrap();
        assert_eq!(phi, inside_cuboid(&obj("goal"), PosDims::DRONE).eventually(Interval::new(0, 60).unwrap()));
        // 0.25 / 0.5 = 0.5 rounds away from zero
        let phi = parse_rt("TRUE.always(0.25, 1)", 0.5).unwrap();
        assert_eq!(phi, Formula::True.always(Interval::new(1, 2).unwrap()));
    }

    #[test]
    fn precedence_and_nesting() {
        let a = inside_cuboid(&obj("goal"), PosDims::DRONE);
        let b = outside_cuboid(&obj("obstacle2"), PosDims::DRONE);
        let phi = parse_rt(
            r#"~STL_formulas.inside_cuboid(goal).eventually(0,1) | STL_formulas.outside_cuboid('obstacle2') & TRUE"#,
            1.0,
        )
        .unwrap();
        let iv = Interval::new(0, 1).unwrap();
        assert_eq!(phi, Formula::Or(vec![a.clone().eventually(iv).not(), b.clone().and(Formula::True)]));
        let phi = parse_rt(r#"(STL_formulas.inside_cuboid("goal") | TRUE).always(0, 1)"#, 1.0).unwrap();
        assert_eq!(phi, a.clone().or(Formula::True).always(iv));
        let phi = parse_rt(r#"STL_formulas.outside_cuboid("obstacle2").until(STL_formulas.inside_cuboid("goal"), 0, 1)"#, 1.0).unwrap();
        assert_eq!(phi, b.until(a, iv));
    }

    #[test]
    fn numeric_bounds() {
        let c = Cuboid::from_bounds([0.0, 1.0, 2.0, 3.0, -1.0, 1.5]).unwrap();
        let want = inside_cuboid(&c, PosDims::DRONE);
        assert_eq!(parse_rt("STL_formulas.inside_cuboid(0, 1, 2, 3, -1, 1.5)", 1.0).unwrap(), want);
        assert_eq!(parse_rt("STL_formulas.inside_cuboid([0, 1, 2, 3, -1, 1.5])", 1.0).unwrap(), want);
        let e = parse_rt("STL_formulas.inside_cuboid([0, 1, 2, 3, -1])", 1.0).unwrap_err();
        assert_eq!(e.kind, ErrorKind::TypeError);
        let e = parse_rt("STL_formulas.inside_cuboid([1, 0, 2, 3, -1, 1])", 1.0).unwrap_err();
        assert_eq!(e.kind, ErrorKind::TypeError);
    }

    #[test]
    fn error_kinds_and_spans() {
        let check = |text: &str, kind: ErrorKind, offending: &str| {
            let e = parse_rt(text, 1.0).unwrap_err();
            assert_eq!(e.kind, kind, "{text}: {e}");
            assert_eq!(&text[e.span.0..e.span.1], offending, "{text}: {e}");
        };
        check(r#"STL_formulas.inside_cuboid("nowhere")"#, ErrorKind::UnknownObject, "\"nowhere\"");
        check(r#"STL_formulas.inside_cuboid("goal").eventualy(0, 5)"#, ErrorKind::Syntax, "eventualy");
        check(r#"STL_formulas.inside_cube("goal")"#, ErrorKind::Syntax, "inside_cube");
        check(r#"STL_formulas.inside_cuboid("goal").always(5, 2)"#, ErrorKind::BadInterval, "2");
        check(r#"STL_formulas.inside_cuboid("goal").always(-1, 2)"#, ErrorKind::BadInterval, "-1");
        check(r#"STL_formulas.inside_cuboid("goal").always(0, "x")"#, ErrorKind::TypeError, "\"x\"");
        check(r#"STL_formulas.inside_cuboid("goal") &"#, ErrorKind::Syntax, "");
        check(r#"STL_formulas.inside_cuboid("goal") TRUE"#, ErrorKind::Syntax, "TRUE");
        check(r#"(TRUE"#, ErrorKind::Syntax, "");
        check("TRUE && TRUE", ErrorKind::Syntax, "&");
        check("TRUE # x", ErrorKind::Lex, "#");
        check("42", ErrorKind::TypeError, "42");
        check("TRUE.always(0 5)", ErrorKind::Syntax, "5");
    }

    #[test]
    fn first_error_wins() {
        let e = parse_rt(r#"STL_formulas.inside_cuboid("nope") & STL_formulas.bogus()"#, 1.0).unwrap_err();
        assert_eq!(e.kind, ErrorKind::UnknownObject);
    }

    #[test]
    fn linear_extension() {
        let phi = parse_rt("STL_formulas.linear([0, 0, 0, 1, 0, 0], -0.5)", 1.0).unwrap();
        assert_eq!(phi, Formula::Pred(LinearPredicate::new(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0], -0.5).unwrap()));
        assert_eq!(parse_rt("STL_formulas.linear([0, 0, 1], 1)", 1.0).unwrap_err().kind, ErrorKind::TypeError);
        assert_eq!(parse_rt("STL_formulas.linear([0, 0, 0, 0, 0, 0], 1)", 1.0).unwrap_err().kind, ErrorKind::TypeError);
    }

    #[test]
    fn rejects_nonpositive_dt() {
        assert_eq!(parse_rt("TRUE", 0.0).unwrap_err().kind, ErrorKind::BadInterval);
    }
}
