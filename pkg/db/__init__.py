# Реестр прогонов
