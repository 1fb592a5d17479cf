use super::ast::{BinaryOp, Expr, ExprKind, FuncDecl, Literal, Program, Stmt, StmtKind};
use super::lexer::{tokenize, Tok, Token};
use super::LangError;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

/// Parses a unit without requiring a `main` function.
pub fn parse_unit(source: &str, unit: &str) -> Result<Program, LangError> {
    let mut p = Parser {
        tokens: tokenize(source)?,
        pos: 0,
    };
    let mut functions = Vec::new();
    while p.peek() != &Tok::Eof {
        functions.push(p.func_decl()?);
    }
    Ok(Program {
        unit: unit.to_string(),
        functions,
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn line(&self) -> u32 {
        self.tokens[self.pos].line
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> LangError {
        let t = &self.tokens[self.pos];
        LangError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, LangError> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            other => Err(self.error(format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn func_decl(&mut self) -> Result<FuncDecl, LangError> {
        let line = self.expect(Tok::Fn, "`fn`")?.line;
        let name = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params: Vec<String> = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let param_line = self.line();
                let param = self.ident("parameter name")?;
                if params.contains(&param) {
                    return Err(LangError::DuplicateParameter {
                        name: param,
                        line: param_line,
                    });
                }
                params.push(param);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        let body = self.block()?;
        Ok(FuncDecl {
            name,
            params,
            body,
            line,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, LangError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.peek() == &Tok::Eof {
                return Err(self.error("expected `}` before end of input"));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, LangError> {
        let line = self.line();
        let kind = match self.peek() {
            Tok::Let => {
                self.advance();
                let name = self.ident("variable name")?;
                self.expect(Tok::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Let { name, value }
            }
            Tok::If => return self.if_stmt(),
            Tok::While => {
                self.advance();
                let cond = self.expr()?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            Tok::Return => {
                self.advance();
                let value = if self.peek() == &Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(value)
            }
            Tok::LBrace => StmtKind::Block(self.block()?),
            Tok::Ident(name) if name == "print" && self.peek_at(1) == &Tok::LParen => {
                self.advance();
                self.advance();
                let value = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Print(value)
            }
            _ => {
                let target = self.expr()?;
                if self.eat(&Tok::Assign) {
                    let value = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    match target.kind {
                        ExprKind::Var(name) => StmtKind::Assign { name, value },
                        ExprKind::Field { object, field } => StmtKind::FieldAssign {
                            object: *object,
                            field,
                            value,
                        },
                        _ => {
                            return Err(LangError::Syntax {
                                line,
                                column: self.tokens[self.pos].column,
                                message: "invalid assignment target".into(),
                            })
                        }
                    }
                } else {
                    self.expect(Tok::Semi, "`;`")?;
                    StmtKind::Expr(target)
                }
            }
        };
        Ok(Stmt { kind, line })
    }

    fn if_stmt(&mut self) -> Result<Stmt, LangError> {
        let line = self.expect(Tok::If, "`if`")?.line;
        let cond = self.expr()?;
        let then_body = self.block()?;
        let else_body = if self.eat(&Tok::Else) {
            if self.peek() == &Tok::If {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then_body,
                else_body,
            },
            line,
        })
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        self.equality()
    }

    fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        let line = lhs.line;
        Expr::new(
            ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            line,
        )
    }

    fn equality(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.comparison()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinaryOp::Eq,
                Tok::NotEq => BinaryOp::Ne,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.comparison()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn comparison(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.additive()?;
        while self.eat(&Tok::Lt) {
            let rhs = self.additive()?;
            lhs = Self::binary(BinaryOp::Lt, lhs, rhs);
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                Tok::Percent => BinaryOp::Rem,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.peek() == &Tok::Minus {
            let line = self.advance().line;
            // `-x` is sugar for `0 - x`
            let operand = self.unary()?;
            let zero = Expr::new(ExprKind::Literal(Literal::Int(0)), line);
            return Ok(Self::binary(BinaryOp::Sub, zero, operand));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, LangError> {
        let mut expr = self.primary()?;
        while self.peek() == &Tok::Dot {
            let line = self.advance().line;
            let field = self.ident("field name")?;
            expr = Expr::new(
                ExprKind::Field {
                    object: Box::new(expr),
                    field,
                },
                line,
            );
        }
        Ok(expr)
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        let line = self.line();
        let kind = match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                ExprKind::Literal(Literal::Int(i))
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Literal(Literal::Str(s))
            }
            Tok::True => {
                self.advance();
                ExprKind::Literal(Literal::Bool(true))
            }
            Tok::False => {
                self.advance();
                ExprKind::Literal(Literal::Bool(false))
            }
            Tok::Null => {
                self.advance();
                ExprKind::Literal(Literal::Null)
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(inner);
            }
            Tok::New => {
                self.advance();
                self.expect(Tok::LBrace, "`{`")?;
                let mut fields: Vec<(String, Expr)> = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let name = self.ident("field name")?;
                        if fields.iter().any(|(f, _)| *f == name) {
                            return Err(self.error(format!("duplicate field `{name}`")));
                        }
                        self.expect(Tok::Colon, "`:`")?;
                        fields.push((name, self.expr()?));
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(Tok::Comma, "`,` or `}`")?;
                    }
                }
                ExprKind::Record(fields)
            }
            Tok::Ident(name) => {
                self.advance();
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma, "`,` or `)`")?;
                        }
                    }
                    ExprKind::Call { name, args }
                } else {
                    ExprKind::Var(name)
                }
            }
            other => {
                return Err(self.error(format!(
                    "expected an expression, found {}",
                    other.describe()
                )))
            }
        };
        Ok(Expr::new(kind, line))
    }
}
