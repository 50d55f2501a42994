# Pacote de serviços - camada de lógica numérica
