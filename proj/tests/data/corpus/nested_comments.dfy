/* Block comments /* nest */ in this language,
   and a stray "quote" inside a comment is fine. */
method Nested(a: int) returns (b: int)
  requires a > 0 // positive input
  ensures b > a
{
  /* assert a > 0; is commented out */
  b := a + 1;
  assert b > a; // kept: /* not a comment start */
}
