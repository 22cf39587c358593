#include <gtest/gtest.h>

#include "hikeys/crypto_provider.hpp"
#include "hikeys/errors.hpp"

using namespace hikeys;
using namespace hikeys::crypto;

namespace {

const Octets kMessage{0xde, 0xad, 0xbe, 0xef};

KeyMaterial group_key(std::uint64_t epoch, KeyKind kind = KeyKind::ClusterKey) {
  return {BitString::from_string("1011001110001111"), kind, 3, epoch};
}

}  // namespace

TEST(Keypair, DeterministicAndDistinct) {
  const DeterministicProvider p;
  const auto a = p.generate_keypair(1, 42);
  const auto b = p.generate_keypair(1, 42);
  EXPECT_EQ(a.public_key, b.public_key);
  EXPECT_EQ(a.private_key, b.private_key);
  EXPECT_NE(p.generate_keypair(2, 42).public_key, a.public_key);
  EXPECT_NE(p.generate_keypair(1, 43).public_key, a.public_key);
}

TEST(Wrap, RoundTripAndDenial) {
  const DeterministicProvider p;
  const auto alice = p.generate_keypair(1, 7);
  const auto bob = p.generate_keypair(2, 7);
  const auto ct = p.wrap(kMessage, alice.public_part());
  EXPECT_EQ(ct.context.kind, ContextKind::UnderPublicKeyOf);
  EXPECT_EQ(ct.context.recipient, 1u);
  EXPECT_EQ(ct.plaintext_bits, 32u);
  EXPECT_EQ(p.unwrap(ct, alice), kMessage);
  EXPECT_THROW(p.unwrap(ct, bob), DecryptionDenied);
}

TEST(Wrap, MalformedKeyIsProviderError) {
  const DeterministicProvider p;
  EXPECT_THROW(p.wrap(kMessage, PublicKey{1, Octets{1, 2}}), ProviderError);
}

TEST(GroupCipher, RoundTripStaleAndWrong) {
  const DeterministicProvider p;
  const auto ct = p.encrypt_group(kMessage, group_key(4));
  EXPECT_EQ(ct.context.kind, ContextKind::UnderClusterKey);
  EXPECT_EQ(ct.context.epoch, 4u);
  EXPECT_EQ(p.decrypt_group(ct, group_key(4)), kMessage);
  EXPECT_THROW(p.decrypt_group(ct, group_key(5)), StaleKeyError);
  EXPECT_THROW(p.decrypt_group(ct, group_key(4, KeyKind::ClusterHeadKey)), WrongKeyError);
  auto forged = group_key(4);
  forged.key = BitString::from_string("0000000000000000");
  EXPECT_THROW(p.decrypt_group(ct, forged), WrongKeyError);
}

TEST(GroupCipher, PayloadHidesPlaintext) {
  const DeterministicProvider p;
  const Octets zeros(16, 0);
  EXPECT_NE(p.encrypt_group(zeros, group_key(1)).payload, zeros);
}

TEST(Certificate, RootTagDecides) {
  const DeterministicProvider p("root-A");
  const auto kp = p.generate_keypair(9, 1);
  EXPECT_TRUE(p.verify(p.issue_certificate(kp)));
  EXPECT_FALSE(p.verify(DeterministicProvider::certificate_from(kp, "mallory")));
  EXPECT_FALSE(DeterministicProvider("root-B").verify(p.issue_certificate(kp)));
}
